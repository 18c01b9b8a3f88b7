"""Synthetic brain-like phantoms for evaluation and benchmarks.

Each phantom is an elliptical shell (bright rim, mid-intensity tissue)
with a handful of Gaussian blobs and mild interior texture noise on an
exactly-zero background, so foreground binarization is meaningful.
"""

from __future__ import annotations

import numpy as np

from .raster import AffineParams, random_affine, warp_affine


def make_phantom(seed, size: int = 240, margin: int = 0) -> np.ndarray:
    """Deterministic phantom on a (size + 2 * margin)^2 canvas.

    ``margin`` leaves empty border space so induced transforms up to
    ~50 px keep all content inside the canvas.
    """
    rng = np.random.default_rng(seed)
    canvas = size + 2 * margin
    ys, xs = np.mgrid[0:canvas, 0:canvas].astype(np.float64)
    cx = canvas / 2 + rng.uniform(-0.02, 0.02) * size
    cy = canvas / 2 + rng.uniform(-0.02, 0.02) * size
    ax = 0.36 * size * rng.uniform(0.9, 1.1)
    ay = 0.30 * size * rng.uniform(0.9, 1.1)
    tilt = rng.uniform(-0.3, 0.3)

    xr = (xs - cx) * np.cos(tilt) + (ys - cy) * np.sin(tilt)
    yr = -(xs - cx) * np.sin(tilt) + (ys - cy) * np.cos(tilt)
    radial = (xr / ax) ** 2 + (yr / ay) ** 2

    img = np.zeros((canvas, canvas), dtype=np.float64)
    img[radial <= 1.0] = 0.35
    img[(radial <= 1.0) & (radial >= 0.82)] = 0.95

    for _ in range(int(rng.integers(4, 8))):
        bx = cx + rng.uniform(-0.5, 0.5) * ax * 0.8
        by = cy + rng.uniform(-0.5, 0.5) * ay * 0.8
        sig = rng.uniform(0.03, 0.09) * size
        amp = rng.uniform(0.25, 0.6)
        bump = amp * np.exp(-((xs - bx) ** 2 + (ys - by) ** 2) / (2.0 * sig * sig))
        img += bump * (radial <= 0.85)

    img += rng.normal(0.0, 0.02, img.shape) * (radial <= 1.0)
    return np.clip(img, 0.0, 1.0).astype(np.float32)


def make_pair(
    seed,
    size: int = 240,
    margin: int = 64,
    trans_max: float = 50.0,
    rot_max: float = 0.3,
    shear_max: float = 0.03,
) -> tuple[np.ndarray, np.ndarray, AffineParams]:
    """Phantom plus a copy deformed by a random in-bounds transform.

    Returns (fixed, moving, induced) where moving was produced by
    backward-warping fixed through ``induced``.
    """
    rng = np.random.default_rng(seed)
    fixed = make_phantom(rng.integers(2 ** 63), size=size, margin=margin)
    extent = max(fixed.shape)
    induced = random_affine(rng.integers(2 ** 63), trans_max, rot_max, shear_max, extent)
    moving = warp_affine(fixed, induced)
    return fixed, moving, induced
