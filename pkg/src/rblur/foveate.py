"""The foveation pipeline: noise, colour/gray copies, adaptive blur, blend."""
from dataclasses import dataclass, field as dataclass_field, replace
from functools import lru_cache
import math
import warnings

import numpy as np
from scipy.ndimage import correlate1d
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import ConfigError, check_batch, check_image, check_nonneg_int, check_positive
from .acuity import (
    DEFAULT_MERGE_THRESHOLD,
    DEFAULT_N_BINS,
    AcuityParams,
    apply_viewing_distance,
    build_acuity_table,
)
from .geometry import FixationPoint, VisualField, as_fixation, eccentricity_map

LUMA_WEIGHTS = (0.299, 0.587, 0.114)


@dataclass(frozen=True)
class RBlurConfig:
    params: AcuityParams = dataclass_field(default_factory=AcuityParams)
    visual_field: int = 224
    noise_scale: float = 0.125
    viewing_distance: int = 3
    n_bins: int = DEFAULT_N_BINS
    merge_threshold: int = DEFAULT_MERGE_THRESHOLD
    seed: int = 0

    def __post_init__(self):
        check_positive(self.noise_scale, "noise_scale", strict=False)
        check_nonneg_int(self.viewing_distance, "viewing_distance")
        check_nonneg_int(self.seed, "seed")

    @property
    def field(self):
        return VisualField(self.visual_field)

    def table(self):
        return _cached_table(self.field, self.params, self.n_bins, self.merge_threshold,
                             self.viewing_distance)

    def replace(self, **changes):
        """Copy with top-level or acuity-parameter fields changed."""
        acuity_keys = {k: changes.pop(k) for k in list(changes) if hasattr(self.params, k)}
        cfg = replace(self, **changes)
        if acuity_keys:
            cfg = replace(cfg, params=replace(cfg.params, **acuity_keys))
        return cfg


@lru_cache(maxsize=64)
def _cached_table(field, params, n_bins, merge_threshold, viewing_distance):
    return apply_viewing_distance(build_acuity_table(field, params, n_bins, merge_threshold),
                                  viewing_distance)


def add_gaussian_noise(img, noise_scale, rng):
    """Add i.i.d. N(0, noise_scale^2) noise to every sample. No clamping."""
    img = np.asarray(img, dtype=np.float64)
    if noise_scale < 0:
        raise ValueError("noise_scale must be non-negative")
    if noise_scale == 0:
        return img.copy()
    return img + noise_scale * rng.standard_normal(img.shape)


def to_grayscale(img):
    """BT.601 luma of a ``(3, H, W)`` image; single-channel input passes through."""
    img = check_image(img)
    if img.shape[0] == 1:
        return img
    r, g, b = LUMA_WEIGHTS
    return (r * img[0] + g * img[1] + b * img[2])[np.newaxis]


def gaussian_kernel(sigma):
    """Normalised 1-D Gaussian truncated at radius ``ceil(3 * sigma)``."""
    if sigma <= 0:
        return np.ones(1)
    radius = math.ceil(3 * sigma)
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def _pad(img, radius):
    return np.pad(img, ((0, 0), (radius, radius), (radius, radius)), mode="symmetric")


def _blur_window(padded, kernel, rows, cols, pad):
    """Blur the image region ``rows`` x ``cols`` using a pre-padded image.

    ``padded`` carries ``pad`` reflected pixels on every side; the window is
    widened by the kernel radius so every output pixel sees real data.
    """
    r = kernel.size // 2
    y0, y1 = rows
    x0, x1 = cols
    window = padded[:, y0 + pad - r:y1 + pad + r, x0 + pad - r:x1 + pad + r]
    out = correlate1d(window, kernel, axis=2, mode="nearest")
    out = correlate1d(out, kernel, axis=1, mode="nearest")
    return out[:, r:r + (y1 - y0), r:r + (x1 - x0)]


def gaussian_blur_fixed(img, sigma):
    """Separable Gaussian blur with reflect (half-sample symmetric) borders."""
    img = check_image(img)
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return img.copy()
    kernel = gaussian_kernel(sigma)
    r = kernel.size // 2
    _, h, w = img.shape
    return _blur_window(_pad(img, r), kernel, (0, h), (0, w), r)


def _sigma_for(table, channel):
    if channel == "color":
        return table.sigma_color
    if channel == "gray":
        return table.sigma_gray
    raise ValueError(f"channel must be 'color' or 'gray', got {channel!r}")


def adaptive_blur(img, table, emap, channel="color"):
    """Blur each pixel with the sigma its distance bin prescribes.

    For every distinct sigma the image is blurred once over the bounding
    square of that bin's annulus, and only the annulus pixels are kept.
    Every output pixel therefore reads the original image at its own sigma.
    """
    img = check_image(img)
    if img.shape[1:] != emap.shape:
        raise ValueError(f"image shape {img.shape[1:]} does not match eccentricity map {emap.shape}")
    sigma_by_distance = _sigma_for(table, channel)
    pixel_sigma = sigma_by_distance[emap.distance]
    sigmas = [s for s in np.unique(pixel_sigma) if s > 0]
    out = img.copy()
    if not sigmas:
        return out
    pad = max(gaussian_kernel(s).size // 2 for s in sigmas)
    padded = _pad(img, pad)
    for s in sigmas:
        mask = pixel_sigma == s
        ys = np.flatnonzero(mask.any(axis=1))
        xs = np.flatnonzero(mask.any(axis=0))
        rows, cols = (ys[0], ys[-1] + 1), (xs[0], xs[-1] + 1)
        blurred = _blur_window(padded, gaussian_kernel(s), rows, cols, pad)
        region = mask[rows[0]:rows[1], cols[0]:cols[1]]
        out[:, rows[0]:rows[1], cols[0]:cols[1]][:, region] = blurred[:, region]
    return out


def blend(color_blurred, gray_blurred, table, emap):
    """Acuity-weighted average of the colour image and the replicated gray image."""
    color_blurred = check_image(color_blurred)
    gray_blurred = check_image(gray_blurred)
    if gray_blurred.shape[1:] != color_blurred.shape[1:]:
        raise ValueError("colour and gray images must have the same spatial shape")
    dc = table.color_acuity[emap.distance]
    dr = table.gray_acuity[emap.distance]
    denom = dc + dr
    zero = denom <= 0
    if np.any(zero):
        warnings.warn(
            f"{int(zero.sum())} pixels have zero total acuity; using the gray value there",
            RuntimeWarning,
            stacklevel=2,
        )
    with np.errstate(invalid="ignore", divide="ignore"):
        w_gray = np.where(zero, 1.0, dr / np.where(zero, 1.0, denom))
    return color_blurred + w_gray * (gray_blurred - color_blurred)


def rblur(img, fixation, cfg=RBlurConfig(), rng=None):
    """Full pipeline for one image and one fixation point.

    ``rng`` defaults to a generator seeded from ``cfg.seed``.
    """
    img = check_image(img, max_size=cfg.visual_field)
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    table = cfg.table()
    emap = eccentricity_map(as_fixation(fixation), cfg.field, img.shape[1:])
    noisy = add_gaussian_noise(img, cfg.noise_scale, rng)
    color = adaptive_blur(noisy, table, emap, "color")
    gray = adaptive_blur(to_grayscale(noisy), table, emap, "gray")
    return blend(color, gray, table, emap)


def resolve_fixation(fixation, visual_field):
    if isinstance(fixation, str):
        if fixation != "center":
            raise ValueError(f"unknown fixation {fixation!r}; use 'center' or (x, y)")
        c = visual_field // 2
        return FixationPoint(c, c)
    return as_fixation(fixation)


class RBlur(TransformerMixin, BaseEstimator):
    """Foveated blur and desaturation as a scikit-learn transformer.

    ``fit`` validates the parameters and builds the acuity table;
    ``transform`` maps a batch of ``(C, H, W)`` (or ``(H, W)``) images to
    their foveated versions. Each image ``i`` gets its own noise stream
    seeded from ``(random_state, i)``. With ``noise="shared"`` every image
    receives the same draw instead, which removes inference-time
    stochasticity when evaluating a fixed test set.

    Parameters
    ----------
    fixation : "center" or (x, y)
        Fixation point in visual-field pixel coordinates.
    noise : {"per_image", "shared"}
    """

    def __init__(self, visual_field=224, sigma_color=0.12, sigma_gray=0.09, alpha=2.5,
                 p_max=0.12, beta=0.05, noise_scale=0.125, viewing_distance=3,
                 n_bins=DEFAULT_N_BINS, merge_threshold=DEFAULT_MERGE_THRESHOLD,
                 fixation="center", noise="per_image", random_state=0):
        self.visual_field = visual_field
        self.sigma_color = sigma_color
        self.sigma_gray = sigma_gray
        self.alpha = alpha
        self.p_max = p_max
        self.beta = beta
        self.noise_scale = noise_scale
        self.viewing_distance = viewing_distance
        self.n_bins = n_bins
        self.merge_threshold = merge_threshold
        self.fixation = fixation
        self.noise = noise
        self.random_state = random_state

    def _make_config(self):
        try:
            params = AcuityParams(self.sigma_color, self.sigma_gray, self.alpha, self.p_max, self.beta)
            return RBlurConfig(params, VisualField(self.visual_field).width, self.noise_scale,
                               self.viewing_distance, self.n_bins, self.merge_threshold,
                               self.random_state)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def fit(self, X=None, y=None):
        if self.noise not in ("per_image", "shared"):
            raise ConfigError(f"noise must be 'per_image' or 'shared', got {self.noise!r}")
        self.config_ = self._make_config()
        self.fixation_ = resolve_fixation(self.fixation, self.visual_field)
        if not self.config_.field.contains(*self.fixation_):
            raise ConfigError(f"fixation {tuple(self.fixation_)} lies outside the visual field")
        self.table_ = self.config_.table()
        return self

    def _rng(self, index):
        if self.noise == "shared":
            return np.random.default_rng([self.random_state])
        return np.random.default_rng([self.random_state, index])

    def transform_one(self, img, fixation=None, index=0):
        """Foveate a single image, optionally at a fixation other than ``fixation``."""
        check_is_fitted(self, "table_")
        f = self.fixation_ if fixation is None else resolve_fixation(fixation, self.visual_field)
        return rblur(img, f, self.config_, self._rng(index))

    def transform(self, X):
        check_is_fitted(self, "table_")
        images = check_batch(X, max_size=self.visual_field)
        out = [rblur(img, self.fixation_, self.config_, self._rng(i)) for i, img in enumerate(images)]
        if len({o.shape for o in out}) == 1:
            return np.stack(out)
        return out
