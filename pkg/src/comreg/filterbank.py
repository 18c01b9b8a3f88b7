"""Two-layer convolutional feature extraction with activation thresholding.

A FilterBank holds two stacks of 3x3 filters (64 each). Applying it to a
preprocessed image yields 128 feature maps: 64 from the first layer and
64 from the second, all at the input resolution ("same" zero padding,
stride 1, rectified). Each map is a keypoint candidate; thresholding
keeps only near-peak activations.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a declared dependency
    njit = None

from .exceptions import WeightsFormatError
from .validation import check_fraction, check_raster

ZRW_MAGIC = b"ZRW1"
LAYER1_FILTERS = 64
LAYER2_FILTERS = 64
KERNEL_SIZE = 3


@dataclass(frozen=True)
class FilterBank:
    """Weights and biases of the two convolution layers.

    Shapes: w1 (64, in_channels, 3, 3), b1 (64,), w2 (64, 64, 3, 3),
    b2 (64,). in_channels is 1 or 3 (grayscale input is replicated
    across channels before the first layer).
    """

    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        w1 = np.asarray(self.w1, dtype=np.float32)
        w2 = np.asarray(self.w2, dtype=np.float32)
        b1 = np.asarray(self.b1, dtype=np.float32)
        b2 = np.asarray(self.b2, dtype=np.float32)
        if w1.ndim != 4 or w1.shape[0] != LAYER1_FILTERS or w1.shape[2:] != (3, 3):
            raise WeightsFormatError(f"layer1 weights must be (64, c, 3, 3), got {w1.shape}")
        if w1.shape[1] not in (1, 3):
            raise WeightsFormatError(f"layer1 must take 1 or 3 channels, got {w1.shape[1]}")
        if w2.shape != (LAYER2_FILTERS, LAYER1_FILTERS, 3, 3):
            raise WeightsFormatError(f"layer2 weights must be (64, 64, 3, 3), got {w2.shape}")
        if b1.shape != (LAYER1_FILTERS,) or b2.shape != (LAYER2_FILTERS,):
            raise WeightsFormatError("bias vectors must have 64 entries per layer")
        for name, arr in (("w1", w1), ("b1", b1), ("w2", w2), ("b2", b2)):
            if not np.all(np.isfinite(arr)):
                raise WeightsFormatError(f"non-finite values in {name}")
        object.__setattr__(self, "w1", w1)
        object.__setattr__(self, "b1", b1)
        object.__setattr__(self, "w2", w2)
        object.__setattr__(self, "b2", b2)
        for arr in (self.w1, self.b1, self.w2, self.b2):
            arr.setflags(write=False)

    @property
    def in_channels(self) -> int:
        return self.w1.shape[1]


# --------------------------------------------------------------------------
# Built-in bank
# --------------------------------------------------------------------------

def _base_kernels() -> list[np.ndarray]:
    """Fixed edge/corner/blob kernels, expanded over four rotations."""
    blur = np.array([[1, 2, 1], [2, 4, 2], [1, 2, 1]], np.float32) / 16
    surround = np.array([[-1, -1, -1], [-1, 8, -1], [-1, -1, -1]], np.float32) / 8
    lap = np.array([[0, -1, 0], [-1, 4, -1], [0, -1, 0]], np.float32) / 4
    sobel = np.array([[-1, 0, 1], [-2, 0, 2], [-1, 0, 1]], np.float32) / 4
    diag = np.array([[0, 1, 2], [-1, 0, 1], [-2, -1, 0]], np.float32) / 4
    corner = np.array([[2, 1, -1], [1, 0, -1], [-1, -1, -2]], np.float32) / 4
    ridge = np.array([[-1, 2, -1], [-2, 4, -2], [-1, 2, -1]], np.float32) / 8

    kernels = [blur, surround]
    for k in (sobel, diag, corner, ridge):
        for rot in range(4):
            kernels.append(np.ascontiguousarray(np.rot90(k, rot)))
    kernels.append(lap)
    kernels.append(-lap)
    return kernels


def builtin_bank(in_channels: int = 1) -> FilterBank:
    """Deterministic bank of fixed edge/corner/blob kernels.

    Lets the pipeline run with no external weights: the base kernels are
    cycled through the 64 first-layer slots at three gains, and each
    second-layer filter applies one base kernel to a single first-layer
    map, producing composed edge-of-edge / edge-of-blob detectors.
    """
    if in_channels not in (1, 3):
        raise ValueError(f"in_channels must be 1 or 3, got {in_channels}")
    kernels = _base_kernels()
    n = len(kernels)

    w1 = np.zeros((LAYER1_FILTERS, in_channels, 3, 3), np.float32)
    for out in range(LAYER1_FILTERS):
        gain = 1.0 + 0.5 * ((out // n) % 3)
        k = kernels[out % n] * gain
        for c in range(in_channels):
            w1[out, c] = k / in_channels
    w2 = np.zeros((LAYER2_FILTERS, LAYER1_FILTERS, 3, 3), np.float32)
    for out in range(LAYER2_FILTERS):
        w2[out, (out * 7 + 3) % LAYER1_FILTERS] = kernels[(out * 11 + 5) % n]

    zeros = np.zeros(LAYER1_FILTERS, np.float32)
    return FilterBank(w1=w1, b1=zeros, w2=w2, b2=zeros.copy())


# --------------------------------------------------------------------------
# Weights file (".zrw")
# --------------------------------------------------------------------------

def save_filter_bank(path, bank: FilterBank) -> None:
    payload = bytearray()
    payload += ZRW_MAGIC
    payload += struct.pack("<I", 2)
    for weights, biases in ((bank.w1, bank.b1), (bank.w2, bank.b2)):
        out_ch, in_ch, kh, kw = weights.shape
        payload += struct.pack("<IIII", out_ch, in_ch, kh, kw)
        payload += weights.astype("<f4").tobytes()
        payload += biases.astype("<f4").tobytes()
    payload += struct.pack("<I", zlib.crc32(bytes(payload)) & 0xFFFFFFFF)
    Path(path).write_bytes(bytes(payload))


def load_filter_bank(path) -> FilterBank:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != ZRW_MAGIC:
        raise WeightsFormatError(f"bad magic in {path}")
    stored_crc = struct.unpack_from("<I", raw, len(raw) - 4)[0]
    if zlib.crc32(raw[:-4]) & 0xFFFFFFFF != stored_crc:
        raise WeightsFormatError(f"checksum failure in {path}")
    (n_layers,) = struct.unpack_from("<I", raw, 4)
    if n_layers != 2:
        raise WeightsFormatError(f"expected 2 layers in {path}, got {n_layers}")
    offset = 8
    layers = []
    for _ in range(n_layers):
        if offset + 16 > len(raw) - 4:
            raise WeightsFormatError(f"truncated layer header in {path}")
        out_ch, in_ch, kh, kw = struct.unpack_from("<IIII", raw, offset)
        offset += 16
        n_weights = out_ch * in_ch * kh * kw
        end = offset + 4 * (n_weights + out_ch)
        if end > len(raw) - 4:
            raise WeightsFormatError(f"truncated layer payload in {path}")
        weights = np.frombuffer(raw, dtype="<f4", count=n_weights, offset=offset)
        weights = weights.reshape(out_ch, in_ch, kh, kw)
        biases = np.frombuffer(raw, dtype="<f4", count=out_ch, offset=offset + 4 * n_weights)
        layers.append((weights, biases))
        offset = end
    if offset != len(raw) - 4:
        raise WeightsFormatError(f"trailing bytes in {path}")
    (w1, b1), (w2, b2) = layers
    return FilterBank(w1=w1.copy(), b1=b1.copy(), w2=w2.copy(), b2=b2.copy())


# --------------------------------------------------------------------------
# Convolution
# --------------------------------------------------------------------------

def _conv_same_dense(maps: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """im2col + matmul path for densely populated filter stacks."""
    n_in, h, w = maps.shape
    n_out = weights.shape[0]
    padded = np.pad(maps, ((0, 0), (1, 1), (1, 1)))
    col = np.empty((n_in, 3, 3, h, w), np.float32)
    for ky in range(3):
        for kx in range(3):
            col[:, ky, kx] = padded[:, ky:ky + h, kx:kx + w]
    flat = weights.reshape(n_out, n_in * 9) @ col.reshape(n_in * 9, h * w)
    return flat.reshape(n_out, h, w)


def _conv_same_sparse(maps: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Tap-accumulation path that skips zero kernel entries.

    Cost scales with the number of nonzero taps, which makes the
    built-in bank (one input map, few taps per output) much cheaper
    than a dense matmul.
    """
    n_in, h, w = maps.shape
    n_out = weights.shape[0]
    padded = np.pad(maps, ((0, 0), (1, 1), (1, 1)))
    out = np.zeros((n_out, h, w), np.float32)
    for o in range(n_out):
        acc = out[o]
        for i in range(n_in):
            kernel = weights[o, i]
            if not kernel.any():
                continue
            for ky in range(3):
                for kx in range(3):
                    coeff = kernel[ky, kx]
                    if coeff != 0.0:
                        acc += coeff * padded[i, ky:ky + h, kx:kx + w]
    return out


def conv_same(maps: np.ndarray, weights: np.ndarray, biases: np.ndarray) -> np.ndarray:
    """Stride-1 "same" cross-correlation over a stack of maps, plus bias.

    ``maps`` is (in_channels, H, W); ``weights`` is (out, in, 3, 3).
    Picks the sparse or dense path by nonzero-tap count; both are exact.
    """
    maps = np.ascontiguousarray(maps, dtype=np.float32)
    weights = np.asarray(weights, dtype=np.float32)
    n_out, n_in = weights.shape[:2]
    if maps.shape[0] != n_in:
        raise ValueError(f"expected {n_in} input maps, got {maps.shape[0]}")
    nonzero_taps = int(np.count_nonzero(weights))
    if nonzero_taps * 16 < n_out * n_in * 9:
        out = _conv_same_sparse(maps, weights)
    else:
        out = _conv_same_dense(maps, weights)
    out += np.asarray(biases, dtype=np.float32)[:, None, None]
    return out


def extract_features(img: np.ndarray, bank: FilterBank) -> np.ndarray:
    """Run both layers on a preprocessed image.

    Returns a (128, H, W) float32 stack: rectified layer-1 maps followed
    by rectified layer-2 maps, spatial dimensions preserved.
    """
    img = check_raster(img)
    replicated = np.broadcast_to(img, (bank.in_channels,) + img.shape)
    layer1 = conv_same(replicated, bank.w1, bank.b1)
    np.maximum(layer1, 0.0, out=layer1)
    layer2 = conv_same(layer1, bank.w2, bank.b2)
    np.maximum(layer2, 0.0, out=layer2)
    return np.concatenate([layer1, layer2], axis=0)


def threshold_map(feature_map: np.ndarray, frac: float = 0.95) -> np.ndarray:
    """Zero out samples at or below ``frac`` of the map maximum.

    An all-zero map is returned unchanged. Kept values are verbatim.
    """
    frac = check_fraction(frac, "frac", inclusive=True)
    feature_map = np.asarray(feature_map, dtype=np.float32)
    peak = float(feature_map.max())
    if peak <= 0.0:
        return np.zeros_like(feature_map)
    out = feature_map.copy()
    out[out <= frac * peak] = 0.0
    return out
