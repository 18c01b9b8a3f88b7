"""Input validation helpers shared across the pipeline."""

from __future__ import annotations

import numpy as np


def check_raster(img, name: str = "image") -> np.ndarray:
    """Validate a 2-D image array and return it as float32.

    Requires at least one pixel and all-finite samples.
    """
    arr = np.asarray(img)
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must have at least one pixel")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite samples")
    return np.ascontiguousarray(arr, dtype=np.float32)


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")


def check_fraction(value: float, name: str, inclusive: bool = False) -> float:
    value = float(value)
    lo_ok = value >= 0.0 if inclusive else value > 0.0
    hi_ok = value <= 1.0 if inclusive else value < 1.0
    if not (lo_ok and hi_ok):
        bounds = "[0, 1]" if inclusive else "(0, 1)"
        raise ValueError(f"{name} must be in {bounds}, got {value}")
    return value


def check_positive_int(value, name: str) -> int:
    ivalue = int(value)
    if ivalue < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return ivalue
