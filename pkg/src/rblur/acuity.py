"""Photopic/scotopic acuity curves and their quantised lookup table.

Acuity is a function of eccentricity only, and eccentricity takes just
``W_V + 1`` distinct values on an integer grid, so everything the blur needs
is precomputed once per configuration into an :class:`AcuityTable` indexed
by L-infinity distance.
"""
from dataclasses import dataclass
from functools import cached_property
import math

import numpy as np

from ._validation import ConfigError, check_nonneg_int, check_positive
from .geometry import VisualField

#: Histogram resolution and merge threshold, calibrated at W_V=224 so that the
#: in-focus region at viewing distance 3 is 47 pixels wide.
DEFAULT_N_BINS = 24
DEFAULT_MERGE_THRESHOLD = 2


@dataclass(frozen=True)
class AcuityParams:
    sigma_color: float = 0.12
    sigma_gray: float = 0.09
    alpha: float = 2.5
    p_max: float = 0.12
    beta: float = 0.05

    def __post_init__(self):
        check_positive(self.sigma_color, "sigma_color")
        check_positive(self.sigma_gray, "sigma_gray")
        check_positive(self.alpha, "alpha")
        # zero is allowed for these two: it switches the gray path or the blur off
        check_positive(self.beta, "beta", strict=False)
        check_positive(self.p_max, "p_max", strict=False)
        if self.p_max > 1:
            raise ConfigError(f"p_max must be <= 1, got {self.p_max}")


def acuity_envelope(e, sigma, alpha):
    """Larger of a Laplace and a Cauchy density at ``e``, clamped to at most 1.

    Both densities are centred at zero; the Cauchy scale is ``alpha * sigma``.
    Works elementwise on arrays.
    """
    e = np.asarray(e, dtype=np.float64)
    if not np.all(np.isfinite(e)) or not (np.isfinite(sigma) and np.isfinite(alpha)):
        raise ValueError("acuity_envelope requires finite inputs")
    if np.any(e < 0):
        raise ValueError("eccentricity must be non-negative")
    if sigma <= 0 or alpha <= 0:
        raise ValueError("sigma and alpha must be positive")
    laplace = np.exp(-e / sigma) / (2.0 * sigma)
    scale = alpha * sigma
    cauchy = 1.0 / (np.pi * scale * (1.0 + (e / scale) ** 2))
    out = np.minimum(1.0, np.maximum(laplace, cauchy))
    return out if out.ndim else float(out)


def photopic_acuity(e, params=AcuityParams()):
    """Colour (cone) acuity in [0, 1]; 1 at the fixation point."""
    return acuity_envelope(e, params.sigma_color, params.alpha)


def scotopic_acuity(e, params=AcuityParams()):
    """Gray (rod) acuity in [0, p_max]; 0 at the fixation point."""
    return params.p_max * (1.0 - acuity_envelope(e, params.sigma_gray, params.alpha))


def histogram_bins(values, n_bins, merge_threshold):
    """Group indices of ``values`` into equal-width value bins, merging small ones.

    Bins with fewer than ``merge_threshold`` members are folded into their
    lower-valued neighbour, scanning from the highest bin down so merges
    cascade. If the lowest bin is still underfull afterwards it joins the
    next bin up. Empty bins are dropped. Returns index arrays in ascending
    value order.
    """
    values = np.asarray(values, dtype=np.float64)
    lo, hi = values.min(), values.max()
    if hi == lo:
        return [np.arange(values.size)]
    idx = np.minimum(((values - lo) / (hi - lo) * n_bins).astype(np.int64), n_bins - 1)
    bins = [np.flatnonzero(idx == b) for b in np.unique(idx)]
    for i in range(len(bins) - 1, 0, -1):
        if bins[i].size < merge_threshold:
            bins[i - 1] = np.concatenate([bins[i - 1], bins[i]])
            del bins[i]
    if len(bins) > 1 and bins[0].size < merge_threshold:
        bins[1] = np.concatenate([bins[0], bins[1]])
        del bins[0]
    if len(bins) < 2:
        raise ConfigError(
            f"only {len(bins)} bin survives with n_bins={n_bins}, merge_threshold={merge_threshold}"
        )
    return [np.sort(b) for b in bins]


def _bin_means(values, bins):
    return np.array([math.fsum(values[b]) / b.size for b in bins])


def _frozen(arr):
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Bin:
    distances: np.ndarray
    acuity: float
    sigma: float


@dataclass(frozen=True, eq=False)
class AcuityTable:
    """Quantised acuity and blur sigma for every L-infinity distance 0..W_V.

    Bin indices run from 0 (nearest the fixation) outwards for both
    channels. ``viewing_distance`` bins are folded into bin 0 when looking
    values up.
    """

    field: VisualField
    params: AcuityParams
    n_bins: int
    merge_threshold: int
    raw_color: np.ndarray
    raw_gray: np.ndarray
    color_bin: np.ndarray
    gray_bin: np.ndarray
    color_bin_values: np.ndarray
    gray_bin_values: np.ndarray
    viewing_distance: int = 0

    @property
    def distances(self):
        return np.arange(self.field.width + 1)

    @property
    def n_color_bins(self):
        return self.color_bin_values.size

    @property
    def n_gray_bins(self):
        return self.gray_bin_values.size

    @cached_property
    def color_acuity(self):
        shifted = np.maximum(self.color_bin - self.viewing_distance, 0)
        return _frozen(self.color_bin_values[shifted])

    @cached_property
    def gray_acuity(self):
        shifted = np.maximum(self.gray_bin - self.viewing_distance, 0)
        return _frozen(self.gray_bin_values[shifted])

    @cached_property
    def sigma_color(self):
        return _frozen(self._sigma(self.color_acuity))

    @cached_property
    def sigma_gray(self):
        return _frozen(self._sigma(self.gray_acuity))

    def _sigma(self, acuity):
        return np.maximum(self.params.beta * self.field.width * (1.0 - acuity), 0.0)

    def bins(self, channel="color"):
        """Effective bins after the viewing-distance shift, nearest first."""
        if channel == "color":
            acuity, sigma = self.color_acuity, self.sigma_color
        elif channel == "gray":
            acuity, sigma = self.gray_acuity, self.sigma_gray
        else:
            raise ValueError(f"channel must be 'color' or 'gray', got {channel!r}")
        out = []
        d = self.distances
        for value in dict.fromkeys(acuity.tolist()):
            mask = acuity == value
            out.append(Bin(d[mask], value, float(sigma[mask][0])))
        return out

    @property
    def in_focus_width(self):
        """Pixels spanned by the nearest colour bin when fixating at a corner."""
        return int(np.count_nonzero(self.color_acuity == self.color_acuity[0]))

    def to_text(self):
        """Tab-separated dump, one row per distance, with ``#`` metadata lines."""
        p = self.params
        lines = [
            f"# W_V={self.field.width} n_bins={self.n_bins} merge_threshold={self.merge_threshold} "
            f"viewing_distance={self.viewing_distance}",
            f"# sigma_color={p.sigma_color!r} sigma_gray={p.sigma_gray!r} alpha={p.alpha!r} "
            f"p_max={p.p_max!r} beta={p.beta!r}",
            "# distance\tcolor_acuity\tgray_acuity\tsigma_color\tsigma_gray",
        ]
        for row in zip(self.distances, self.color_acuity, self.gray_acuity,
                       self.sigma_color, self.sigma_gray):
            lines.append(f"{row[0]}\t" + "\t".join(f"{v:.17g}" for v in row[1:]))
        return "\n".join(lines) + "\n"


def _bin_lookup(bins, size, nearest_first_order):
    lookup = np.empty(size, dtype=np.int64)
    for rank, b in enumerate(nearest_first_order):
        lookup[bins[b]] = rank
    return lookup


def build_acuity_table(field=VisualField(), params=AcuityParams(), n_bins=DEFAULT_N_BINS,
                       merge_threshold=DEFAULT_MERGE_THRESHOLD):
    """Quantise both acuity curves over distances 0..W_V into a lookup table."""
    n_bins = check_nonneg_int(n_bins, "n_bins", minimum=2)
    merge_threshold = check_nonneg_int(merge_threshold, "merge_threshold")
    d = np.arange(field.width + 1)
    e = d / field.width
    raw_color = np.asarray(photopic_acuity(e, params))
    raw_gray = np.asarray(scotopic_acuity(e, params))

    channels = []
    for raw in (raw_color, raw_gray):
        if raw.max() == raw.min():
            bins = [np.arange(raw.size)]
        else:
            bins = histogram_bins(raw, n_bins, merge_threshold)
        means = _bin_means(raw, bins)
        # value-ordered bins map to contiguous distance ranges; reorder nearest first
        order = sorted(range(len(bins)), key=lambda b: bins[b].min())
        channels.append((_bin_lookup(bins, raw.size, order), means[order]))

    (color_bin, color_values), (gray_bin, gray_values) = channels
    return AcuityTable(
        field=field,
        params=params,
        n_bins=n_bins,
        merge_threshold=merge_threshold,
        raw_color=_frozen(raw_color),
        raw_gray=_frozen(raw_gray),
        color_bin=_frozen(color_bin),
        gray_bin=_frozen(gray_bin),
        color_bin_values=_frozen(color_values),
        gray_bin_values=_frozen(gray_values),
    )


def apply_viewing_distance(table, k):
    """Fold the ``k`` nearest bins beyond bin 0 into it and shift the rest inward.

    A distance in original bin ``i`` takes the value of bin ``max(0, i - k)``.
    Shifts compose additively. ``k`` must leave at least one colour bin
    standing; the gray channel saturates at bin 0 if it has fewer bins.
    """
    k = check_nonneg_int(k, "viewing_distance")
    total = table.viewing_distance + k
    if total >= table.n_color_bins:
        raise ConfigError(
            f"viewing distance {total} must be smaller than the number of colour bins "
            f"({table.n_color_bins})"
        )
    if k == 0:
        return table
    return AcuityTable(
        field=table.field,
        params=table.params,
        n_bins=table.n_bins,
        merge_threshold=table.merge_threshold,
        raw_color=table.raw_color,
        raw_gray=table.raw_gray,
        color_bin=table.color_bin,
        gray_bin=table.gray_bin,
        color_bin_values=table.color_bin_values,
        gray_bin_values=table.gray_bin_values,
        viewing_distance=total,
    )
