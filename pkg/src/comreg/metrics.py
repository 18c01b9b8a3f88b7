"""Similarity and error metrics between fixed and moving images.

Dice and mutual information work on [0, 1]-rescaled intensities so that
binarization and histogram binning are meaningful regardless of the
input range; SSIM rescales internally as well. MSE is the plain mean
squared sample difference.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .raster import rescale01
from .validation import check_raster, check_same_shape

SSIM_WINDOW = 8
SSIM_C1 = 0.01 ** 2
SSIM_C2 = 0.03 ** 2
MI_BINS = 32


@dataclass(frozen=True)
class MetricReport:
    """Dice and SSIM in [0, 1]; mutual information in bits; MSE >= 0."""

    dice: float
    ssim: float
    mi: float
    mse: float

    def as_dict(self) -> dict[str, float]:
        return {"dice": self.dice, "ssim": self.ssim, "mi": self.mi, "mse": self.mse}


def dice(fixed: np.ndarray, moving: np.ndarray, fg_threshold: float = 0.0) -> float:
    """Overlap 2|A.B| / (|A| + |B|) of the foreground masks.

    Masks are (rescaled sample) > fg_threshold. When both masks are
    empty the images agree, so the score is 1.0.
    """
    fixed = check_raster(fixed, "fixed")
    moving = check_raster(moving, "moving")
    check_same_shape(fixed, moving)
    mask_f = rescale01(fixed) > fg_threshold
    mask_m = rescale01(moving) > fg_threshold
    total = int(mask_f.sum()) + int(mask_m.sum())
    if total == 0:
        return 1.0
    return 2.0 * int((mask_f & mask_m).sum()) / total


def _window_sums(img: np.ndarray, win: int) -> np.ndarray:
    """Sums over all valid win x win windows via an integral image."""
    integral = np.zeros((img.shape[0] + 1, img.shape[1] + 1), dtype=np.float64)
    np.cumsum(np.cumsum(img, axis=0), axis=1, out=integral[1:, 1:])
    return (
        integral[win:, win:]
        - integral[:-win, win:]
        - integral[win:, :-win]
        + integral[:-win, :-win]
    )


def ssim(fixed: np.ndarray, moving: np.ndarray, window: int = SSIM_WINDOW) -> float:
    """Mean local structural similarity over sliding windows.

    Both images are rescaled to [0, 1]; statistics use uniform window
    weighting with stabilizers c1 = (0.01)^2 and c2 = (0.03)^2 for a
    dynamic range of 1. The mean map value is clamped to [0, 1].
    """
    fixed = check_raster(fixed, "fixed")
    moving = check_raster(moving, "moving")
    check_same_shape(fixed, moving)
    if min(fixed.shape) < window:
        raise ValueError(f"image {fixed.shape} smaller than {window}x{window} window")
    f = rescale01(fixed).astype(np.float64)
    m = rescale01(moving).astype(np.float64)

    n = float(window * window)
    mu_f = _window_sums(f, window) / n
    mu_m = _window_sums(m, window) / n
    var_f = _window_sums(f * f, window) / n - mu_f * mu_f
    var_m = _window_sums(m * m, window) / n - mu_m * mu_m
    cov = _window_sums(f * m, window) / n - mu_f * mu_m

    num = (2.0 * mu_f * mu_m + SSIM_C1) * (2.0 * cov + SSIM_C2)
    den = (mu_f * mu_f + mu_m * mu_m + SSIM_C1) * (var_f + var_m + SSIM_C2)
    score = float(np.mean(num / den))
    return min(max(score, 0.0), 1.0)


def mutual_information(fixed: np.ndarray, moving: np.ndarray, bins: int = MI_BINS) -> float:
    """Histogram mutual information in bits (Kullback-Leibler form).

    Joint distribution from a bins x bins histogram of the [0, 1]
    rescaled intensities; only nonzero cells contribute.
    """
    fixed = check_raster(fixed, "fixed")
    moving = check_raster(moving, "moving")
    check_same_shape(fixed, moving)
    if bins < 2:
        raise ValueError(f"bins must be >= 2, got {bins}")
    f = rescale01(fixed).ravel()
    m = rescale01(moving).ravel()
    joint, _, _ = np.histogram2d(f, m, bins=bins, range=[[0.0, 1.0], [0.0, 1.0]])
    p = joint / joint.sum()
    pf = p.sum(axis=1)
    pm = p.sum(axis=0)
    nz = p > 0.0
    denom = np.outer(pf, pm)[nz]
    return float(np.sum(p[nz] * np.log2(p[nz] / denom)))


def mse(fixed: np.ndarray, moving: np.ndarray) -> float:
    """Mean squared per-pixel difference."""
    fixed = check_raster(fixed, "fixed")
    moving = check_raster(moving, "moving")
    check_same_shape(fixed, moving)
    diff = fixed.astype(np.float64) - moving.astype(np.float64)
    return float(np.mean(diff * diff))


def compute_all(
    fixed: np.ndarray,
    moving: np.ndarray,
    fg_threshold: float = 0.0,
    bins: int = MI_BINS,
) -> MetricReport:
    return MetricReport(
        dice=dice(fixed, moving, fg_threshold),
        ssim=ssim(fixed, moving),
        mi=mutual_information(fixed, moving, bins),
        mse=mse(fixed, moving),
    )
