"""End-to-end affine registration of a moving image onto a fixed image.

Pipeline: standardize and zero-pad both images, extract 128 feature
maps each, take thresholded center-of-mass keypoints, pair them by
filter index, and average the regressor's predictions over bootstrap
subsets. The estimate maps fixed coordinates into moving-image
coordinates, so the moving image is backward-warped by it directly.

Metrics are computed on [0, 1]-rescaled copies of the original images
(not the standardized tensors) at the original extent, before and after
warping.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from sklearn.base import BaseEstimator

from .filterbank import FilterBank, extract_features
from .keypoints import extract_keypoints, pair_keypoints
from .metrics import MetricReport, compute_all
from .raster import AffineParams, compose, lerp_identity, preprocess, rescale01, warp_affine
from .regressor import TransformRegressor, bootstrap_estimate
from .validation import check_raster, check_same_shape


@dataclass(frozen=True)
class RegistrationResult:
    params: AffineParams
    warped: np.ndarray
    metrics_before: MetricReport
    metrics_after: MetricReport
    elapsed_ms: float
    n_pairs: int
    stage_ms: dict[str, float] = field(default_factory=dict)


def estimate_params(
    fixed_prep: np.ndarray,
    moving_prep: np.ndarray,
    model: TransformRegressor,
    bank: FilterBank,
    threshold_frac: float = 0.95,
    seed=0,
    stage_ms: dict | None = None,
) -> AffineParams:
    """Keypoint estimate between two preprocessed images."""
    check_same_shape(fixed_prep, moving_prep)
    extent = max(fixed_prep.shape)
    t0 = time.perf_counter()
    fixed_stack = extract_features(fixed_prep, bank)
    moving_stack = extract_features(moving_prep, bank)
    t1 = time.perf_counter()
    fixed_kps = extract_keypoints(fixed_stack, extent, threshold_frac)
    moving_kps = extract_keypoints(moving_stack, extent, threshold_frac)
    corr = pair_keypoints(fixed_kps, moving_kps)
    t2 = time.perf_counter()
    params = bootstrap_estimate(model, corr, seed=seed)
    t3 = time.perf_counter()
    if stage_ms is not None:
        stage_ms["conv"] = stage_ms.get("conv", 0.0) + (t1 - t0) * 1e3
        stage_ms["keypoints"] = stage_ms.get("keypoints", 0.0) + (t2 - t1) * 1e3
        stage_ms["estimate"] = stage_ms.get("estimate", 0.0) + (t3 - t2) * 1e3
        stage_ms["n_pairs"] = len(corr)
    return params


def warp_cropped(img_padded: np.ndarray, params: AffineParams, pad: int, out_shape) -> np.ndarray:
    """Warp a padded image and cut back to the original extent."""
    warped = warp_affine(img_padded, params)
    h, w = out_shape
    if pad:
        warped = warped[pad: pad + h, pad: pad + w]
    return np.ascontiguousarray(warped)


def register(
    fixed: np.ndarray,
    moving: np.ndarray,
    model: TransformRegressor,
    bank: FilterBank,
    threshold_frac: float = 0.95,
    pad: int = 64,
    seed=0,
    fg_threshold: float = 0.0,
    mi_bins: int = 32,
) -> RegistrationResult:
    """Full pipeline; returns the estimate, the warped moving image at
    the original extent, and all four metrics before and after."""
    fixed = check_raster(fixed, "fixed")
    moving = check_raster(moving, "moving")
    check_same_shape(fixed, moving)

    stage_ms: dict[str, float] = {}
    t_start = time.perf_counter()

    t0 = time.perf_counter()
    fixed_prep = preprocess(fixed, pad)
    moving_prep = preprocess(moving, pad)
    stage_ms["preprocess"] = (time.perf_counter() - t0) * 1e3

    params = estimate_params(
        fixed_prep, moving_prep, model, bank,
        threshold_frac=threshold_frac, seed=seed, stage_ms=stage_ms,
    )
    n_pairs = int(stage_ms.pop("n_pairs"))

    fixed01 = rescale01(fixed)
    moving01 = rescale01(moving)
    t0 = time.perf_counter()
    moving01_padded = np.pad(moving01, pad) if pad else moving01
    warped = warp_cropped(moving01_padded, params, pad, fixed.shape)
    stage_ms["warp"] = (time.perf_counter() - t0) * 1e3

    t0 = time.perf_counter()
    before = compute_all(fixed01, moving01, fg_threshold, mi_bins)
    after = compute_all(fixed01, warped, fg_threshold, mi_bins)
    stage_ms["metrics"] = (time.perf_counter() - t0) * 1e3

    return RegistrationResult(
        params=params,
        warped=warped,
        metrics_before=before,
        metrics_after=after,
        elapsed_ms=(time.perf_counter() - t_start) * 1e3,
        n_pairs=n_pairs,
        stage_ms=stage_ms,
    )


def iterative_register(
    fixed: np.ndarray,
    moving: np.ndarray,
    model: TransformRegressor,
    bank: FilterBank,
    lr: float = 0.5,
    max_iters: int = 10,
    eps: float = 0.02,
    threshold_frac: float = 0.95,
    pad: int = 64,
    seed=0,
) -> AffineParams:
    """Estimate in steps, composing a fraction ``lr`` of each residual.

    After each pass the moving image is re-warped by the accumulated
    transform and a residual estimate is taken against the fixed image;
    iteration stops when the residual is within ``eps`` of identity.
    With lr=1 and max_iters=1 this equals the single-shot estimate.
    """
    if not (0.0 < lr <= 1.0):
        raise ValueError(f"lr must be in (0, 1], got {lr}")
    if max_iters < 1:
        raise ValueError(f"max_iters must be >= 1, got {max_iters}")
    fixed = check_raster(fixed, "fixed")
    moving = check_raster(moving, "moving")
    check_same_shape(fixed, moving)

    fixed_prep = preprocess(fixed, pad)
    moving_prep = preprocess(moving, pad)
    total = AffineParams.identity()
    seed_seq = np.random.SeedSequence(seed) if isinstance(seed, int) else seed
    iter_seeds = [seed if isinstance(seed, int) else seed_seq] + list(seed_seq.spawn(max_iters - 1))

    current = moving_prep
    for iteration in range(max_iters):
        residual = estimate_params(
            fixed_prep, current, model, bank,
            threshold_frac=threshold_frac, seed=iter_seeds[iteration],
        )
        total = compose(total, lerp_identity(residual, lr))
        if residual.max_deviation_from_identity() <= eps:
            break
        if iteration < max_iters - 1:
            current = warp_affine(moving_prep, total)
    return total


class AffineRegistrator(BaseEstimator):
    """Estimator wrapper: fit(fixed, moving) learns the transform,
    transform(img) applies it to an image of the same extent.

    The model and bank default to the packaged regressor and the
    built-in filter bank when not supplied.
    """

    def __init__(
        self,
        model: TransformRegressor | None = None,
        bank: FilterBank | None = None,
        threshold_frac: float = 0.95,
        pad: int = 64,
        seed: int = 0,
        fg_threshold: float = 0.0,
        mi_bins: int = 32,
        iterative: bool = False,
        lr: float = 0.5,
        max_iters: int = 10,
    ):
        self.model = model
        self.bank = bank
        self.threshold_frac = threshold_frac
        self.pad = pad
        self.seed = seed
        self.fg_threshold = fg_threshold
        self.mi_bins = mi_bins
        self.iterative = iterative
        self.lr = lr
        self.max_iters = max_iters

    def _resolve(self):
        from .assets import default_bank, default_model
        model = self.model if self.model is not None else default_model()
        bank = self.bank if self.bank is not None else default_bank()
        return model, bank

    def fit(self, X, y=None):
        """X is the (fixed, moving) image pair."""
        fixed, moving = X
        model, bank = self._resolve()
        if self.iterative:
            self.params_ = iterative_register(
                fixed, moving, model, bank,
                lr=self.lr, max_iters=self.max_iters,
                threshold_frac=self.threshold_frac, pad=self.pad, seed=self.seed,
            )
            result = None
        else:
            result = register(
                fixed, moving, model, bank,
                threshold_frac=self.threshold_frac, pad=self.pad, seed=self.seed,
                fg_threshold=self.fg_threshold, mi_bins=self.mi_bins,
            )
            self.params_ = result.params
        if result is not None:
            self.warped_ = result.warped
            self.metrics_before_ = result.metrics_before
            self.metrics_after_ = result.metrics_after
            self.elapsed_ms_ = result.elapsed_ms
        self._fixed_shape_ = np.asarray(fixed).shape
        return self

    def transform(self, X) -> np.ndarray:
        """Warp an image by the fitted transform (original extent)."""
        if not hasattr(self, "params_"):
            raise RuntimeError("registrator is not fitted")
        img = rescale01(check_raster(X, "image"))
        padded = np.pad(img, self.pad) if self.pad else img
        return warp_cropped(padded, self.params_, self.pad, img.shape)

    def fit_transform(self, X, y=None) -> np.ndarray:
        self.fit(X, y)
        if hasattr(self, "warped_"):
            return self.warped_
        return self.transform(X[1])
