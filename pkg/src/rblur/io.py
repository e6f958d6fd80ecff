"""File formats: 8-bit images, raw float rasters, key=value configs, manifests."""
from pathlib import Path
import struct

import numpy as np
from PIL import Image, UnidentifiedImageError

RAW_MAGIC = b"RBLF"
RAW_SUFFIX = ".rbf"


class DataError(ValueError):
    """An input file is missing, undecodable or malformed."""


def read_raw(path):
    """Read a raw float raster: magic, three little-endian uint32 (C, H, W), float32 samples."""
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:4] != RAW_MAGIC:
        raise DataError(f"{path}: not a raw float raster")
    c, h, w = struct.unpack("<3I", data[4:16])
    expected = 16 + 4 * c * h * w
    if len(data) != expected:
        raise DataError(f"{path}: expected {expected} bytes, found {len(data)}")
    return np.frombuffer(data, dtype="<f4", offset=16).reshape(c, h, w).astype(np.float64)


def write_raw(path, img):
    img = np.asarray(img)
    if img.ndim == 2:
        img = img[np.newaxis]
    c, h, w = img.shape
    with open(path, "wb") as fh:
        fh.write(RAW_MAGIC + struct.pack("<3I", c, h, w))
        fh.write(np.ascontiguousarray(img, dtype="<f4").tobytes())


def read_image(path):
    """Load an image as float64 ``(C, H, W)`` in [0, 1] (raw rasters are returned as stored)."""
    path = Path(path)
    if path.suffix.lower() == RAW_SUFFIX:
        return read_raw(path)
    try:
        with Image.open(path) as im:
            im.load()
            im = im.convert("L" if im.mode in ("1", "L", "I", "I;16", "F") else "RGB")
            arr = np.asarray(im, dtype=np.float64) / 255.0
    except (OSError, UnidentifiedImageError) as exc:
        raise DataError(f"{path}: cannot decode image ({exc})") from exc
    if arr.ndim == 2:
        return arr[np.newaxis]
    return np.moveaxis(arr, -1, 0)


def to_uint8(img):
    """Clamp to [0, 1] and quantise with round-half-up to 8 bits, as ``(H, W[, C])``."""
    img = np.asarray(img, dtype=np.float64)
    q = np.floor(255.0 * np.clip(img, 0.0, 1.0) + 0.5).astype(np.uint8)
    if q.ndim == 3:
        q = q[0] if q.shape[0] == 1 else np.moveaxis(q, 0, -1)
    return q


def write_image(path, img):
    """Write PNG/PPM/PGM (8-bit, clamped) or a raw float raster by suffix."""
    path = Path(path)
    if path.suffix.lower() == RAW_SUFFIX:
        write_raw(path, img)
        return
    q = to_uint8(img)
    fmt = {".png": "PNG", ".ppm": "PPM", ".pgm": "PPM", ".pnm": "PPM"}.get(path.suffix.lower())
    if fmt is None:
        raise ValueError(f"unsupported output format: {path.suffix}")
    if path.suffix.lower() == ".ppm" and q.ndim == 2:
        q = np.repeat(q[..., None], 3, axis=-1)
    Image.fromarray(q).save(path, format=fmt)


def read_heatmap(path):
    """Single-channel weights; 8-bit files are read as raw 0..255 values."""
    path = Path(path)
    if path.suffix.lower() == RAW_SUFFIX:
        h = read_raw(path)
        if h.shape[0] != 1:
            raise DataError(f"{path}: heatmap must have one channel")
        return h[0]
    try:
        with Image.open(path) as im:
            return np.asarray(im.convert("L"), dtype=np.float64)
    except (OSError, UnidentifiedImageError) as exc:
        raise DataError(f"{path}: cannot decode heatmap ({exc})") from exc


def read_config(path):
    """Parse a flat ``key=value`` file; ``#`` starts a comment, hyphens become underscores."""
    out = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = value
    return out


def format_config(values):
    return "".join(f"{k}={v}\n" for k, v in values.items())


def read_manifest(path):
    """Return ``[(image_path, label)]`` from ``path<TAB>label`` lines.

    Relative paths resolve against the manifest's directory.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"{path}: cannot read manifest ({exc})") from exc
    entries = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        parts = line.rstrip("\n").split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 'path<TAB>label'")
        try:
            label = int(parts[1])
        except ValueError:
            raise DataError(f"{path}:{lineno}: label {parts[1]!r} is not an integer") from None
        image_path = Path(parts[0])
        if not image_path.is_absolute():
            image_path = path.parent / image_path
        if not image_path.exists():
            raise DataError(f"{path}:{lineno}: no such file {image_path}")
        entries.append((image_path, label))
    if not entries:
        raise DataError(f"{path}: manifest lists no samples")
    return entries
