"""Affine parameter regression from point correspondences.

A small rectifier MLP is trained purely on synthetic correspondences:
clouds of 64 points X, a random 2x3 transform M, and Y = M [X, 1]. At
inference the same network estimates M for keypoint pairs it has never
seen, so no registration-specific training is involved.

The network operates on a canonical form of each correspondence set:
both point clouds are shifted to zero centroid and scaled to unit RMS
radius (the standard normalization for point-based transform fitting),
pairs are sorted by canonical fixed-point coordinates, the second input
half holds moving-minus-fixed differences, and the output is the offset
of the canonical transform from identity. The canonical frame is undone
with exact algebra around the forward pass, so pure translations and
isotropic rescalings are recovered exactly and a fixed==moving cloud
maps to the zero input.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator

from .exceptions import DegenerateGeometryError, TrainingDivergedError, WeightsFormatError
from .keypoints import Correspondences
from .raster import AffineParams

ZRM_MAGIC = b"ZRM1"
N_POINTS = 64
INPUT_WIDTH = 4 * N_POINTS
IDENTITY6 = np.array([1.0, 0.0, 0.0, 0.0, 1.0, 0.0])

_MIN_SCALE = 1e-9


# --------------------------------------------------------------------------
# Canonical frame algebra
# --------------------------------------------------------------------------

def _cloud_frame(points: np.ndarray) -> tuple[np.ndarray, float]:
    """Centroid and RMS per-coordinate radius of a point cloud."""
    center = points.mean(axis=0)
    scale = float(np.sqrt(np.mean((points - center) ** 2)))
    return center, max(scale, _MIN_SCALE)


def assemble_input(fixed_pts: np.ndarray, moving_pts: np.ndarray) -> np.ndarray:
    """Raw 256-vector: 64 fixed points (x, y interleaved), then 64 moving."""
    fixed_pts = np.asarray(fixed_pts, dtype=np.float64).reshape(N_POINTS, 2)
    moving_pts = np.asarray(moving_pts, dtype=np.float64).reshape(N_POINTS, 2)
    return np.concatenate([fixed_pts.ravel(), moving_pts.ravel()])


def _split_input(vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    vec = np.asarray(vec, dtype=np.float64).reshape(-1, INPUT_WIDTH)
    n = vec.shape[0]
    fixed = vec[:, : 2 * N_POINTS].reshape(n, N_POINTS, 2)
    moving = vec[:, 2 * N_POINTS:].reshape(n, N_POINTS, 2)
    return fixed, moving


def _canonicalize(fixed: np.ndarray, moving: np.ndarray):
    """Map (n, 64, 2) cloud pairs to canonical network inputs.

    Returns (inputs (n, 256), frames (cX, sX, cY, sY)).
    """
    c_f = fixed.mean(axis=1)
    c_m = moving.mean(axis=1)
    s_f = np.sqrt(np.mean((fixed - c_f[:, None]) ** 2, axis=(1, 2)))
    s_m = np.sqrt(np.mean((moving - c_m[:, None]) ** 2, axis=(1, 2)))
    s_f = np.maximum(s_f, _MIN_SCALE)
    s_m = np.maximum(s_m, _MIN_SCALE)
    fc = (fixed - c_f[:, None]) / s_f[:, None, None]
    mc = (moving - c_m[:, None]) / s_m[:, None, None]
    order = np.lexsort((fc[..., 1], fc[..., 0]), axis=-1)
    rows = np.arange(fc.shape[0])[:, None]
    fc = fc[rows, order]
    mc = mc[rows, order]
    n = fc.shape[0]
    inputs = np.concatenate([fc.reshape(n, -1), (mc - fc).reshape(n, -1)], axis=1)
    return inputs, (c_f, s_f, c_m, s_m)


def _frame_matrices(frames):
    """Homogeneous lifts of the canonical maps for each sample."""
    c_f, s_f, c_m, s_m = frames
    n = len(s_f)
    t_fix_inv = np.zeros((n, 3, 3))
    t_fix_inv[:, 0, 0] = s_f
    t_fix_inv[:, 1, 1] = s_f
    t_fix_inv[:, :2, 2] = c_f
    t_fix_inv[:, 2, 2] = 1.0
    t_mov = np.zeros((n, 3, 3))
    t_mov[:, 0, 0] = 1.0 / s_m
    t_mov[:, 1, 1] = 1.0 / s_m
    t_mov[:, :2, 2] = -c_m / s_m[:, None]
    t_mov[:, 2, 2] = 1.0
    return t_fix_inv, t_mov


def _canonical_targets(m6: np.ndarray, frames) -> np.ndarray:
    """Targets in canonical space: TY . M . TX^-1 minus identity."""
    n = m6.shape[0]
    lifted = np.tile(np.eye(3), (n, 1, 1))
    lifted[:, :2, :] = m6.reshape(n, 2, 3)
    t_fix_inv, t_mov = _frame_matrices(frames)
    canon = t_mov @ lifted @ t_fix_inv
    return canon[:, :2, :].reshape(n, 6) - IDENTITY6


def _uncanonical_outputs(out6: np.ndarray, frames) -> np.ndarray:
    """Invert `_canonical_targets` for network outputs."""
    n = out6.shape[0]
    canon = np.tile(np.eye(3), (n, 1, 1))
    canon[:, :2, :] = (out6 + IDENTITY6).reshape(n, 2, 3)
    c_f, s_f, c_m, s_m = frames
    t_fix = np.zeros((n, 3, 3))
    t_fix[:, 0, 0] = 1.0 / s_f
    t_fix[:, 1, 1] = 1.0 / s_f
    t_fix[:, :2, 2] = -c_f / s_f[:, None]
    t_fix[:, 2, 2] = 1.0
    t_mov_inv = np.zeros((n, 3, 3))
    t_mov_inv[:, 0, 0] = s_m
    t_mov_inv[:, 1, 1] = s_m
    t_mov_inv[:, :2, 2] = c_m
    t_mov_inv[:, 2, 2] = 1.0
    raw = t_mov_inv @ canon @ t_fix
    return raw[:, :2, :].reshape(n, 6)


# --------------------------------------------------------------------------
# Synthetic correspondence generation
# --------------------------------------------------------------------------

def _sample_clouds(rng, n: int, cluster_frac: float) -> np.ndarray:
    """Fixed-point clouds: iid U(0,1)^2, a share of them clustered."""
    uniform = rng.random((n, N_POINTS, 2))
    centers = rng.uniform(0.2, 0.8, (n, 1, 2))
    spreads = rng.uniform(0.03, 0.28, (n, 1, 1))
    clustered = np.clip(centers + rng.standard_normal((n, N_POINTS, 2)) * spreads, 0.0, 1.0)
    use_cluster = rng.random(n) < cluster_frac
    return np.where(use_cluster[:, None, None], clustered, uniform)


def _sample_transforms(rng, n: int, small_frac: float) -> np.ndarray:
    """Transforms: all six entries U(-1, 1), a share near identity.

    A third of the near-identity share is exactly identity, which pins
    the network output on the fixed==moving manifold.
    """
    broad = rng.uniform(-1.0, 1.0, (n, 6))
    radii = 10.0 ** rng.uniform(-4.0, np.log10(0.5), (n, 1))
    radii[rng.random((n, 1)) < 0.4] = 0.0
    small = IDENTITY6 + rng.uniform(-1.0, 1.0, (n, 6)) * radii
    use_small = rng.random(n) < small_frac
    return np.where(use_small[:, None], small, broad)


def _apply_transforms(m6: np.ndarray, clouds: np.ndarray) -> np.ndarray:
    mats = m6.reshape(-1, 2, 3)
    return np.einsum("nij,npj->npi", mats[:, :, :2], clouds) + mats[:, None, :, 2]


def _sample_batch(rng, n: int, cluster_frac: float, small_frac: float):
    fixed = _sample_clouds(rng, n, cluster_frac)
    m6 = _sample_transforms(rng, n, small_frac)
    moving = _apply_transforms(m6, fixed)
    return fixed, moving, m6


def generate_training_sample(seed) -> tuple[np.ndarray, AffineParams]:
    """One synthetic training pair, deterministic per seed.

    64 points X ~ U(0,1)^2, a transform M with all six entries
    ~ U(-1,1), and Y = M [X, 1]. Returns the raw input vector (all X
    coordinates then all Y coordinates) and M as the target.
    """
    rng = np.random.default_rng(seed)
    fixed, moving, m6 = _sample_batch(rng, 1, cluster_frac=0.0, small_frac=0.0)
    return assemble_input(fixed[0], moving[0]), AffineParams.from_array(m6[0])


# --------------------------------------------------------------------------
# MLP forward / backward
# --------------------------------------------------------------------------

def mlp_forward(weights, biases, x: np.ndarray):
    """Forward pass; returns (output, activations per layer input)."""
    acts = [x]
    for i, (w, b) in enumerate(zip(weights, biases)):
        x = x @ w + b
        if i < len(weights) - 1:
            x = np.maximum(x, 0.0)
        acts.append(x)
    return x, acts


def mlp_backward(weights, acts, grad_out: np.ndarray):
    """Gradients of a scalar loss w.r.t. weights and biases.

    ``grad_out`` is dLoss/dOutput for the forward pass that produced
    ``acts``. Returns (weight_grads, bias_grads).
    """
    grad_w = [None] * len(weights)
    grad_b = [None] * len(weights)
    g = grad_out
    for i in reversed(range(len(weights))):
        grad_w[i] = acts[i].T @ g
        grad_b[i] = g.sum(axis=0)
        if i > 0:
            g = (g @ weights[i].T) * (acts[i] > 0)
    return grad_w, grad_b


class TransformRegressor(BaseEstimator):
    """MLP regressor from 64 point correspondences to affine parameters.

    fit() needs no external data: batches are generated on the fly from
    the synthetic correspondence sampler. ``cluster_frac`` of clouds are
    compact Gaussian clusters (real keypoint clouds are not uniform)
    and ``small_frac`` of transforms are drawn near identity so small
    corrections are resolved precisely.

    The loss is canonical-space MSE plus ``tail_weight`` times the mean
    quartic error, which trades a little average accuracy for a much
    smaller worst case.

    Attributes after fit: ``weights_``/``biases_`` (float32),
    ``loss_history_`` (loss per batch), ``epoch_losses_`` and
    ``val_rmse_`` (raw-parameter RMSE on fresh samples).
    """

    def __init__(
        self,
        hidden_sizes=(256, 128, 64),
        n_samples: int = 500_000,
        n_passes: int = 20,
        batch_size: int = 256,
        learning_rate: float = 1e-3,
        lr_decay: str = "cosine",
        cluster_frac: float = 0.2,
        small_frac: float = 0.3,
        tail_weight: float = 300.0,
        seed: int = 0,
    ):
        self.hidden_sizes = hidden_sizes
        self.n_samples = n_samples
        self.n_passes = n_passes
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.lr_decay = lr_decay
        self.cluster_frac = cluster_frac
        self.small_frac = small_frac
        self.tail_weight = tail_weight
        self.seed = seed

    # -- training ----------------------------------------------------------

    def _init_layers(self, rng):
        sizes = [INPUT_WIDTH, *self.hidden_sizes, 6]
        weights, biases = [], []
        for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
            limit = np.sqrt(6.0 / fan_in)
            weights.append(rng.uniform(-limit, limit, (fan_in, fan_out)).astype(np.float32))
            biases.append(np.zeros(fan_out, dtype=np.float32))
        return weights, biases

    def fit(self, X=None, y=None):
        """Train on generated batches (or on raw (X, y) samples if given).

        ``X`` rows are raw 256-vectors as produced by
        generate_training_sample; ``y`` rows are the six transform
        entries. Deterministic per ``seed``.
        """
        rng = np.random.default_rng(self.seed)
        weights, biases = self._init_layers(rng)

        provided = None
        if X is not None:
            fixed, moving = _split_input(X)
            y = np.asarray(y, dtype=np.float64).reshape(len(fixed), 6)
            inputs, frames = _canonicalize(fixed, moving)
            targets = _canonical_targets(y, frames)
            provided = (inputs.astype(np.float32), targets.astype(np.float32))
            n_samples = len(inputs)
        else:
            n_samples = self.n_samples

        steps_per_pass = max(int(np.ceil(n_samples / self.batch_size)), 1)
        total_steps = steps_per_pass * self.n_passes

        m_w = [np.zeros_like(w) for w in weights]
        v_w = [np.zeros_like(w) for w in weights]
        m_b = [np.zeros_like(b) for b in biases]
        v_b = [np.zeros_like(b) for b in biases]
        beta1, beta2, eps = 0.9, 0.999, 1e-8

        losses = np.zeros(total_steps, dtype=np.float64)
        epoch_losses = []
        for step in range(1, total_steps + 1):
            if self.lr_decay == "cosine":
                lr = self.learning_rate * 0.5 * (1.0 + np.cos(np.pi * step / total_steps))
                lr = max(lr, self.learning_rate * 1e-3)
            else:
                lr = self.learning_rate

            if provided is None:
                fixed, moving, m6 = _sample_batch(
                    rng, self.batch_size, self.cluster_frac, self.small_frac
                )
                inputs, frames = _canonicalize(fixed, moving)
                xb = inputs.astype(np.float32)
                yb = _canonical_targets(m6, frames).astype(np.float32)
            else:
                idx = rng.integers(0, n_samples, self.batch_size)
                xb = provided[0][idx]
                yb = provided[1][idx]

            out, acts = mlp_forward(weights, biases, xb)
            diff = out - yb
            sq = diff * diff
            # quartic term pushes down worst-case errors without
            # disturbing the small-error regime
            loss = float(np.mean(sq) + self.tail_weight * np.mean(sq * sq))
            if not np.isfinite(loss):
                raise TrainingDivergedError(f"non-finite loss at step {step}")
            losses[step - 1] = loss

            grad_out = (2.0 * diff + self.tail_weight * 4.0 * diff * sq) / diff.size
            grad_w, grad_b = mlp_backward(weights, acts, grad_out)
            for group in ((weights, grad_w, m_w, v_w), (biases, grad_b, m_b, v_b)):
                params, grads, first, second = group
                for i, grad in enumerate(grads):
                    first[i] = beta1 * first[i] + (1 - beta1) * grad
                    second[i] = beta2 * second[i] + (1 - beta2) * grad * grad
                    m_hat = first[i] / (1 - beta1 ** step)
                    v_hat = second[i] / (1 - beta2 ** step)
                    params[i] -= lr * m_hat / (np.sqrt(v_hat) + eps)

            if step % steps_per_pass == 0:
                window = losses[step - steps_per_pass: step]
                epoch_losses.append(float(window.mean()))

        self.weights_ = weights
        self.biases_ = biases
        self.loss_history_ = losses
        self.epoch_losses_ = epoch_losses
        self.val_rmse_ = self._validation_rmse(rng)
        if not np.isfinite(self.val_rmse_):
            raise TrainingDivergedError("validation loss is not finite")
        return self

    def _validation_rmse(self, rng, n: int = 10_000) -> float:
        """Raw-parameter RMSE on freshly generated uniform samples."""
        fixed, moving, m6 = _sample_batch(rng, n, cluster_frac=0.0, small_frac=0.0)
        inputs, frames = _canonicalize(fixed, moving)
        out, _ = mlp_forward(self.weights_, self.biases_, inputs.astype(np.float32))
        pred = _uncanonical_outputs(out.astype(np.float64), frames)
        return float(np.sqrt(np.mean((pred - m6) ** 2)))

    # -- inference ---------------------------------------------------------

    def _check_fitted(self):
        if not hasattr(self, "weights_"):
            raise RuntimeError("regressor is not fitted; call fit() or load a model file")

    def predict(self, X) -> np.ndarray:
        """Predict the six transform entries for raw 256-vector rows."""
        self._check_fitted()
        single = np.ndim(X) == 1
        fixed, moving = _split_input(X)
        inputs, frames = _canonicalize(fixed, moving)
        out, _ = mlp_forward(self.weights_, self.biases_, inputs.astype(np.float32))
        pred = _uncanonical_outputs(out.astype(np.float64), frames)
        return pred[0] if single else pred


# --------------------------------------------------------------------------
# Estimation operations
# --------------------------------------------------------------------------

def _corr_arrays(corr, moving=None):
    if isinstance(corr, Correspondences):
        return corr.fixed, corr.moving
    return np.asarray(corr, dtype=np.float64), np.asarray(moving, dtype=np.float64)


def predict_params(model: TransformRegressor, corr, moving=None) -> AffineParams:
    """Single-forward-pass estimate from exactly 64 correspondences."""
    fixed_pts, moving_pts = _corr_arrays(corr, moving)
    if len(fixed_pts) != N_POINTS:
        raise ValueError(f"need exactly {N_POINTS} correspondences, got {len(fixed_pts)}")
    return AffineParams.from_array(model.predict(assemble_input(fixed_pts, moving_pts)))


def bootstrap_estimate(
    model: TransformRegressor,
    corr,
    seed=0,
    n_subsets: int = 10,
    subset_size: int = N_POINTS,
) -> AffineParams:
    """Average the predictions over resampled correspondence subsets.

    Subsets of ``subset_size`` pairs are drawn uniformly with
    replacement; the estimate is the arithmetic mean of the per-subset
    parameter vectors. Deterministic per seed.
    """
    fixed_pts, moving_pts = _corr_arrays(corr)
    n = len(fixed_pts)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(n_subsets, subset_size))
    batch = np.stack([
        assemble_input(fixed_pts[row], moving_pts[row]) for row in idx
    ])
    preds = model.predict(batch)
    return AffineParams.from_array(preds.mean(axis=0))


def least_squares_fit(corr, moving=None) -> AffineParams:
    """Closed-form minimizer of sum ||Y - M [X, 1]||^2.

    The exact-geometry baseline for the network estimator. Raises
    DegenerateGeometryError when the fixed points are collinear.
    """
    fixed_pts, moving_pts = _corr_arrays(corr, moving)
    if len(fixed_pts) < 3:
        raise DegenerateGeometryError(f"need >= 3 pairs, got {len(fixed_pts)}")
    design = np.column_stack([fixed_pts, np.ones(len(fixed_pts))])
    solution, _, rank, _ = np.linalg.lstsq(design, moving_pts, rcond=None)
    if rank < 3:
        raise DegenerateGeometryError("fixed points are collinear; affine fit is underdetermined")
    m = solution.T
    return AffineParams.from_matrix(m)


# --------------------------------------------------------------------------
# Model file (".zrm")
# --------------------------------------------------------------------------

def save_regressor(path, model: TransformRegressor) -> None:
    model._check_fitted()
    payload = bytearray()
    payload += ZRM_MAGIC
    payload += struct.pack("<I", len(model.weights_))
    for w, b in zip(model.weights_, model.biases_):
        rows, cols = w.shape
        payload += struct.pack("<II", rows, cols)
        payload += w.astype("<f4").tobytes()
        payload += b.astype("<f4").tobytes()
    payload += struct.pack("<I", zlib.crc32(bytes(payload)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(payload))


def load_regressor(path) -> TransformRegressor:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != ZRM_MAGIC:
        raise WeightsFormatError(f"bad magic in {path}")
    stored_crc = struct.unpack_from("<I", raw, len(raw) - 4)[0]
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise WeightsFormatError(f"checksum failure in {path}")
    (n_layers,) = struct.unpack_from("<I", raw, 4)
    offset = 8
    weights, biases = [], []
    for _ in range(n_layers):
        if offset + 8 > len(raw) - 4:
            raise WeightsFormatError(f"truncated layer header in {path}")
        rows, cols = struct.unpack_from("<II", raw, offset)
        offset += 8
        end = offset + 4 * (rows * cols + cols)
        if end > len(raw) - 4:
            raise WeightsFormatError(f"truncated layer payload in {path}")
        w = np.frombuffer(raw, dtype="<f4", count=rows * cols, offset=offset).reshape(rows, cols)
        b = np.frombuffer(raw, dtype="<f4", count=cols, offset=offset + 4 * rows * cols)
        weights.append(w.copy())
        biases.append(b.copy())
        offset = end
    if offset != len(raw) - 4:
        raise WeightsFormatError(f"trailing bytes in {path}")
    if not weights or weights[0].shape[0] != INPUT_WIDTH or weights[-1].shape[1] != 6:
        raise WeightsFormatError("model must map 256 inputs to 6 outputs")
    for i in range(len(weights) - 1):
        if weights[i].shape[1] != weights[i + 1].shape[0]:
            raise WeightsFormatError("layer shapes are not chained")

    model = TransformRegressor(hidden_sizes=tuple(w.shape[1] for w in weights[:-1]))
    model.weights_ = weights
    model.biases_ = biases
    return model
