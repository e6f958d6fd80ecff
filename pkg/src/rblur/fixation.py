"""Fixation selection: heatmap-driven scanpaths, fixed grids, score aggregation."""
import math

import numpy as np

from .geometry import FixationPoint


def check_heatmap(h):
    h = np.asarray(h, dtype=np.float64)
    if h.ndim != 2 or h.size == 0:
        raise ValueError(f"heatmap must be a non-empty 2-D array, got shape {h.shape}")
    if not np.all(np.isfinite(h)) or np.any(h < 0):
        raise ValueError("heatmap weights must be finite and non-negative")
    return h


def mask_heatmap(h, f, mask_sigma):
    """Multiply ``h`` by an inverted Gaussian centred on fixation ``f``.

    The weight at ``f`` itself becomes exactly zero.
    """
    h = check_heatmap(h)
    if not mask_sigma > 0:
        raise ValueError("mask_sigma must be positive")
    x, y = f
    yy, xx = np.indices(h.shape)
    r2 = (xx - x) ** 2 + (yy - y) ** 2
    # -expm1 keeps full precision far from the centre and gives an exact 0 at it
    out = h * -np.expm1(-r2 / (2.0 * mask_sigma ** 2))
    if 0 <= y < h.shape[0] and 0 <= x < h.shape[1]:
        out[y, x] = 0.0
    return out


def center_bias_heatmap(shape, sigma=None):
    """Isotropic Gaussian bump at the image centre.

    A placeholder saliency source for running scanpaths without a learned
    fixation model. ``sigma`` defaults to a quarter of the larger side.
    """
    height, width = shape
    sigma = max(shape) / 4 if sigma is None else sigma
    yy, xx = np.indices(shape)
    r2 = (xx - (width - 1) / 2) ** 2 + (yy - (height - 1) / 2) ** 2
    return np.exp(-r2 / (2.0 * sigma ** 2))


class ScanpathError(ValueError):
    """The heatmap ran out of mass before enough fixations were drawn."""

    def __init__(self, message, points):
        super().__init__(message)
        self.points = points


def sample_scanpath(h, n=5, mask_sigma=None, rng=None, mode="sample"):
    """Draw ``n`` fixations, masking the heatmap around each one.

    ``mode="sample"`` draws proportionally to the current weights;
    ``mode="argmax"`` takes the heaviest pixel (first in row-major order on
    ties). ``mask_sigma`` defaults to one eighth of the larger heatmap side.
    """
    h = check_heatmap(h)
    if n < 1:
        raise ValueError("n must be >= 1")
    if mode not in ("sample", "argmax"):
        raise ValueError(f"mode must be 'sample' or 'argmax', got {mode!r}")
    if mask_sigma is None:
        mask_sigma = max(h.shape) / 8
    if rng is None:
        rng = np.random.default_rng(0)
    width = h.shape[1]
    points = []
    for _ in range(n):
        flat = h.ravel()
        total = flat.sum()
        if not total > 0:
            raise ScanpathError(
                f"heatmap exhausted after {len(points)} of {n} fixations", points
            )
        if mode == "argmax":
            idx = int(np.argmax(flat))
        else:
            idx = int(rng.choice(flat.size, p=flat / total))
        f = FixationPoint(idx % width, idx // width)
        points.append(f)
        h = mask_heatmap(h, f, mask_sigma)
    return points


def fixation_grid(field, side):
    """``side`` x ``side`` points at the centres of equal strips, row-major."""
    if side < 1:
        raise ValueError("side must be >= 1")
    w = field.width
    centers = [(2 * i + 1) * w // (2 * side) for i in range(side)]
    return [FixationPoint(x, y) for y in centers for x in centers]


def five_fixations(field):
    """Four corner pixels and the centre pixel, duplicates removed."""
    last, c = field.width - 1, field.width // 2
    pts = [FixationPoint(0, 0), FixationPoint(last, 0), FixationPoint(0, last),
           FixationPoint(last, last), FixationPoint(c, c)]
    return list(dict.fromkeys(pts))


def fixations_for_count(field, n):
    """Centre first, then corners, then a grid for counts above five."""
    if n < 1:
        raise ValueError("fixation count must be >= 1")
    five = five_fixations(field)
    ordered = [five[-1]] + five[:-1]
    if n <= len(ordered):
        return ordered[:n]
    grid = fixation_grid(field, math.ceil(math.sqrt(n)))
    return grid[:n]


def aggregate_scores(score_vectors):
    """Mean of equal-length per-class score vectors."""
    vectors = [np.asarray(v, dtype=np.float64) for v in score_vectors]
    if not vectors:
        raise ValueError("need at least one score vector")
    lengths = {v.shape for v in vectors}
    if len(lengths) != 1 or vectors[0].ndim != 1:
        raise ValueError(f"score vectors must be 1-D with equal lengths, got shapes {sorted(lengths)}")
    return np.mean(vectors, axis=0)


def any_correct(predictions, truth):
    predictions = list(predictions)
    if not predictions:
        raise ValueError("need at least one prediction")
    return any(p == truth for p in predictions)

