"""Visual-field coordinates and the L-infinity eccentricity metric.

Level sets of the metric are axis-aligned squares centred on the fixation
point, so every region of constant eccentricity can be cut out of an image
with plain array slicing.
"""
from dataclasses import dataclass
import numbers

import numpy as np


@dataclass(frozen=True)
class VisualField:
    """Square region of side ``width`` pixels that the transform operates over."""

    width: int = 224

    def __post_init__(self):
        if isinstance(self.width, bool) or not isinstance(self.width, numbers.Integral) or self.width < 1:
            raise ValueError(f"visual field width must be a positive integer, got {self.width!r}")

    def contains(self, x, y):
        return 0 <= x < self.width and 0 <= y < self.width


@dataclass(frozen=True)
class FixationPoint:
    x: int
    y: int

    def __iter__(self):
        yield self.x
        yield self.y


@dataclass(frozen=True)
class EccentricityMap:
    """Per-pixel integer L-infinity distance to the fixation and its normalised form."""

    distance: np.ndarray
    field: VisualField

    @property
    def eccentricity(self):
        return self.distance / self.field.width

    @property
    def shape(self):
        return self.distance.shape


def as_fixation(point):
    if isinstance(point, FixationPoint):
        return point
    x, y = point
    if not (isinstance(x, numbers.Integral) and isinstance(y, numbers.Integral)):
        raise ValueError(f"fixation coordinates must be integers, got {point!r}")
    return FixationPoint(int(x), int(y))


def _check_in_field(x, y, field, what):
    if not field.contains(x, y):
        raise ValueError(f"{what} ({x}, {y}) lies outside the {field.width}-pixel visual field")


def eccentricity(p, f, field):
    """Normalised L-infinity distance between pixel ``p`` and fixation ``f``."""
    px, py = p
    f = as_fixation(f)
    _check_in_field(px, py, field, "pixel")
    _check_in_field(f.x, f.y, field, "fixation")
    return max(abs(px - f.x), abs(py - f.y)) / field.width


def eccentricity_map(f, field, shape=None):
    """Distance map for an image of ``shape`` (height, width) fixated at ``f``.

    ``shape`` defaults to the full field. Pixel coordinates are integer
    indices in the image frame; the image must fit inside the field.
    """
    f = as_fixation(f)
    _check_in_field(f.x, f.y, field, "fixation")
    height, width = (field.width, field.width) if shape is None else shape
    if height > field.width or width > field.width:
        raise ValueError(
            f"image of size {width}x{height} exceeds the {field.width}-pixel visual field"
        )
    dy = np.abs(np.arange(height) - f.y)
    dx = np.abs(np.arange(width) - f.x)
    return EccentricityMap(np.maximum(dy[:, None], dx[None, :]), field)
