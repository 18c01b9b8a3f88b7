"""Bootstrap uncertainty of transform estimates via pixel blackening.

Each trial blackens a random subset of pixels in the preprocessed
moving image, re-runs the estimate, and warps the blackened image by
its own estimate. Parameter variance across trials quantifies estimate
stability; the per-pixel variance of the warped copies localizes it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ComregError
from .validation import check_fraction, check_raster


@dataclass(frozen=True)
class UncertaintyReport:
    """Sample variances over n >= 2 blackening trials.

    ``param_variance`` has one entry per affine parameter in row-major
    (a11, a12, tx, a21, a22, ty) order; ``variance_map`` matches the
    fixed image dimensions. Variances use the n-1 denominator.
    """

    param_variance: np.ndarray
    variance_map: np.ndarray
    n_trials: int

    def __post_init__(self):
        if self.n_trials < 2:
            raise ValueError(f"need at least 2 trials, got {self.n_trials}")
        if np.any(self.param_variance < 0) or not np.all(np.isfinite(self.param_variance)):
            raise ValueError("parameter variances must be finite and non-negative")


def blacken(img: np.ndarray, fraction: float, seed) -> np.ndarray:
    """Set exactly round(fraction * W * H) distinct pixels to zero."""
    img = check_raster(img)
    fraction = check_fraction(fraction, "fraction")
    count = int(np.rint(fraction * img.size))
    out = img.copy()
    if count == 0:
        return out
    rng = np.random.default_rng(seed)
    flat_idx = rng.choice(img.size, size=count, replace=False)
    out.reshape(-1)[flat_idx] = 0.0
    return out


def estimate_uncertainty(
    fixed: np.ndarray,
    moving: np.ndarray,
    model,
    bank,
    n: int = 10,
    fraction: float = 0.05,
    seed=0,
    threshold_frac: float = 0.95,
    pad: int = 64,
) -> UncertaintyReport:
    """Run ``n`` blackening trials of the registration estimate.

    Blackening happens after preprocessing, so zeroed pixels match the
    padding background. Each trial owns a seed derived from ``seed``,
    which keeps results reproducible regardless of execution order.
    Trials whose estimate fails are skipped; fewer than 2 surviving
    trials is an error.
    """
    from .registration import estimate_params, warp_cropped
    from .raster import preprocess

    fixed = check_raster(fixed, "fixed")
    moving = check_raster(moving, "moving")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")

    fixed_prep = preprocess(fixed, pad)
    moving_prep = preprocess(moving, pad)
    # one blackening stream per trial; the estimate itself keeps the base
    # seed so a fraction of zero reproduces the identical pipeline n times
    blacken_seeds = np.random.SeedSequence(seed).spawn(n)

    params_rows = []
    warped_crops = []
    for blacken_seed in blacken_seeds:
        blackened = blacken(moving_prep, fraction, blacken_seed) if fraction > 0 \
            else moving_prep.copy()
        try:
            params = estimate_params(
                fixed_prep, blackened, model, bank,
                threshold_frac=threshold_frac, seed=seed,
            )
        except ComregError:
            continue
        params_rows.append(params.as_array())
        warped_crops.append(warp_cropped(blackened, params, pad, fixed.shape))

    if len(params_rows) < 2:
        raise ComregError(f"only {len(params_rows)} of {n} uncertainty trials succeeded")

    stack = np.asarray(params_rows)
    maps = np.asarray(warped_crops, dtype=np.float64)
    return UncertaintyReport(
        param_variance=stack.var(axis=0, ddof=1),
        variance_map=maps.var(axis=0, ddof=1).astype(np.float32),
        n_trials=len(params_rows),
    )
