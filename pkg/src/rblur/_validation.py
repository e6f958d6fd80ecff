"""Input validation helpers shared across the package."""
import numbers

import numpy as np


class ConfigError(ValueError):
    """Raised when a parameter combination cannot produce a valid transform."""


def check_image(img, max_size=None, name="image"):
    """Return ``img`` as a float64 ``(C, H, W)`` array.

    2-D input is treated as a single-channel image. Only 1 or 3 channels
    are accepted. With ``max_size`` set, either spatial extent exceeding it
    is rejected.
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[np.newaxis]
    if arr.ndim != 3:
        raise ValueError(f"{name} must be 2-D or (C, H, W), got shape {arr.shape}")
    if arr.shape[0] not in (1, 3):
        raise ValueError(f"{name} must have 1 or 3 channels, got {arr.shape[0]}")
    if arr.shape[1] < 1 or arr.shape[2] < 1:
        raise ValueError(f"{name} has an empty spatial dimension: {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite values")
    if max_size is not None and max(arr.shape[1:]) > max_size:
        raise ValueError(
            f"{name} of size {arr.shape[2]}x{arr.shape[1]} exceeds the visual field ({max_size})"
        )
    return arr


def check_batch(X, max_size=None):
    """Return a list of validated images from a batch array or sequence."""
    if isinstance(X, np.ndarray) and X.ndim in (2, 3) and not (X.ndim == 3 and X.shape[0] not in (1, 3)):
        # a single image passed where a batch is expected is ambiguous; refuse it
        raise ValueError("expected a batch of images, got a single image; wrap it in a list")
    return [check_image(x, max_size=max_size, name=f"X[{i}]") for i, x in enumerate(X)]


def check_positive(value, name, strict=True):
    if not isinstance(value, numbers.Real) or not np.isfinite(value):
        raise ConfigError(f"{name} must be a finite real number, got {value!r}")
    if strict and value <= 0:
        raise ConfigError(f"{name} must be > 0, got {value}")
    if not strict and value < 0:
        raise ConfigError(f"{name} must be >= 0, got {value}")
    return float(value)


def check_nonneg_int(value, name, minimum=0):
    if isinstance(value, bool) or not isinstance(value, numbers.Integral) or value < minimum:
        raise ConfigError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)
