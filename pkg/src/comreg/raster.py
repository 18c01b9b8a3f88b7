"""Image I/O, preprocessing, and affine warping.

Images are 2-D float32 numpy arrays in row-major order, treated as
immutable values. Coordinates follow x = column, y = row with pixel
centers at integer positions. Affine parameters act on normalized
coordinates (col / L, row / L) with L = max(width, height), which keeps
the aspect ratio of the image.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .exceptions import RasterFormatError
from .validation import check_raster

F32R_MAGIC = b"F32R"


@dataclass(frozen=True)
class AffineParams:
    """Six parameters of a 2x3 affine matrix on homogeneous [x, y, 1].

    The linear part is (a11, a12; a21, a22); (tx, ty) translates in
    normalized coordinate units.
    """

    a11: float
    a12: float
    a21: float
    a22: float
    tx: float
    ty: float

    def __post_init__(self):
        vals = (self.a11, self.a12, self.a21, self.a22, self.tx, self.ty)
        if not all(np.isfinite(v) for v in vals):
            raise ValueError(f"affine parameters must be finite, got {vals}")

    @classmethod
    def identity(cls) -> "AffineParams":
        return cls(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)

    @classmethod
    def from_matrix(cls, m) -> "AffineParams":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1], m[0, 2], m[1, 2])

    @classmethod
    def from_array(cls, a) -> "AffineParams":
        """Build from the row-major 6-vector (a11, a12, tx, a21, a22, ty)."""
        a = np.asarray(a, dtype=np.float64).reshape(6)
        return cls(a[0], a[1], a[3], a[4], a[2], a[5])

    def to_matrix(self) -> np.ndarray:
        return np.array(
            [[self.a11, self.a12, self.tx], [self.a21, self.a22, self.ty]],
            dtype=np.float64,
        )

    def as_array(self) -> np.ndarray:
        """Row-major 6-vector (a11, a12, tx, a21, a22, ty)."""
        return np.array(
            [self.a11, self.a12, self.tx, self.a21, self.a22, self.ty],
            dtype=np.float64,
        )

    def max_deviation_from_identity(self) -> float:
        return float(np.abs(self.as_array() - AffineParams.identity().as_array()).max())


def compose(outer: AffineParams, inner: AffineParams) -> AffineParams:
    """Parameters of the map p -> outer(inner(p))."""
    a = np.vstack([outer.to_matrix(), [0.0, 0.0, 1.0]])
    b = np.vstack([inner.to_matrix(), [0.0, 0.0, 1.0]])
    return AffineParams.from_matrix((a @ b)[:2])


def invert(params: AffineParams) -> AffineParams:
    m = np.vstack([params.to_matrix(), [0.0, 0.0, 1.0]])
    return AffineParams.from_matrix(np.linalg.inv(m)[:2])


def lerp_identity(params: AffineParams, fraction: float) -> AffineParams:
    """Interpolate in parameter space between identity and ``params``."""
    if fraction == 1.0:
        return params
    ident = AffineParams.identity().as_array()
    return AffineParams.from_array(ident + fraction * (params.as_array() - ident))


# --------------------------------------------------------------------------
# I/O
# --------------------------------------------------------------------------

def load_raster(path) -> np.ndarray:
    """Load a grayscale image as float32.

    PNG samples are scaled to [0, 1] by bit depth; multi-channel images
    are reduced to grayscale by the channel mean. The raw ".f32r" format
    is loaded verbatim.
    """
    path = Path(path)
    if not path.exists():
        raise RasterFormatError(f"file not found: {path}")
    if path.suffix.lower() == ".f32r":
        return load_f32r(path)
    try:
        with Image.open(path) as im:
            arr = np.asarray(im)
    except Exception as exc:
        raise RasterFormatError(f"unreadable image file {path}: {exc}") from exc
    if arr.dtype == np.uint8:
        scale = 255.0
    elif arr.dtype in (np.uint16, np.int32):
        scale = 65535.0
    else:
        raise RasterFormatError(f"unsupported sample type {arr.dtype} in {path}")
    if arr.ndim == 3:
        arr = arr.mean(axis=2)
    return check_raster(arr.astype(np.float64) / scale, str(path))


def save_raster(path, img: np.ndarray) -> None:
    """Write an image as 8-bit grayscale PNG (values clipped to [0, 1])."""
    img = check_raster(img)
    data = np.clip(img, 0.0, 1.0)
    Image.fromarray((data * 255.0 + 0.5).astype(np.uint8), mode="L").save(path)


def load_f32r(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if len(raw) < 12 or raw[:4] != F32R_MAGIC:
        raise RasterFormatError(f"bad magic in {path}")
    width, height = struct.unpack_from("<II", raw, 4)
    if width < 1 or height < 1:
        raise RasterFormatError(f"bad dimensions {width}x{height} in {path}")
    expected = 12 + 4 * width * height
    if len(raw) != expected:
        raise RasterFormatError(
            f"truncated f32r file {path}: expected {expected} bytes, got {len(raw)}"
        )
    samples = np.frombuffer(raw, dtype="<f4", offset=12).reshape(height, width)
    return check_raster(samples, str(path))


def save_f32r(path, img: np.ndarray) -> None:
    img = check_raster(img)
    height, width = img.shape
    with open(path, "wb") as fh:
        fh.write(F32R_MAGIC)
        fh.write(struct.pack("<II", width, height))
        fh.write(img.astype("<f4").tobytes())


# --------------------------------------------------------------------------
# Preprocessing and warping
# --------------------------------------------------------------------------

def preprocess(img: np.ndarray, pad: int = 64) -> np.ndarray:
    """Standardize to zero mean / unit std, then zero-pad each side.

    A constant image (std below 1e-8) is only mean-centered, so the
    result is all zeros and matches the padding background.
    """
    img = check_raster(img)
    if pad < 0:
        raise ValueError(f"pad must be >= 0, got {pad}")
    x = img.astype(np.float64)
    std = x.std()
    if not np.isfinite(std) or std < 1e-8:
        std = 1.0
    out = (x - x.mean()) / std
    if pad:
        out = np.pad(out, pad)
    return out.astype(np.float32)


def rescale01(img: np.ndarray) -> np.ndarray:
    """Min-max rescale to [0, 1]; a constant image maps to all zeros."""
    img = check_raster(img)
    lo = float(img.min())
    hi = float(img.max())
    if hi - lo < 1e-12:
        return np.zeros_like(img)
    return (img - lo) / (hi - lo)


def warp_affine(img: np.ndarray, params: AffineParams) -> np.ndarray:
    """Backward-map ``img`` through ``params`` with bilinear sampling.

    Each output pixel p (normalized coordinates) takes the bilinear
    sample of ``img`` at M [p, 1]; samples outside the image are 0. The
    sample position is computed directly in pixel units so the identity
    transform reproduces the input exactly.
    """
    img = check_raster(img)
    h, w = img.shape
    scale = float(max(h, w))
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx = params.a11 * xs + params.a12 * ys + params.tx * scale
    sy = params.a21 * xs + params.a22 * ys + params.ty * scale

    x0 = np.floor(sx).astype(np.int64)
    y0 = np.floor(sy).astype(np.int64)
    fx = sx - x0
    fy = sy - y0

    out = np.zeros((h, w), dtype=np.float64)
    for dy in (0, 1):
        for dx in (0, 1):
            weight = (fx if dx else 1.0 - fx) * (fy if dy else 1.0 - fy)
            xi = x0 + dx
            yi = y0 + dy
            inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
            vals = img[np.clip(yi, 0, h - 1), np.clip(xi, 0, w - 1)]
            out += weight * np.where(inside, vals, 0.0)
    return out.astype(np.float32)


def random_affine(
    seed,
    trans_max: float,
    rot_max: float,
    shear_max: float,
    img_extent: float,
) -> AffineParams:
    """Draw rotation(theta) . shear(s) . translation(t) uniformly.

    theta ~ U(-rot_max, rot_max) radians, s ~ U(-shear_max, shear_max)
    radians, and t ~ U(-trans_max, trans_max)^2 pixels converted to
    normalized units by ``img_extent``. Rotation and shear pivot about
    the image center. Deterministic for a given seed.
    """
    if trans_max < 0 or rot_max < 0 or shear_max < 0:
        raise ValueError("transform bounds must be non-negative")
    if img_extent <= 0:
        raise ValueError(f"img_extent must be positive, got {img_extent}")
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-rot_max, rot_max)
    shear = rng.uniform(-shear_max, shear_max)
    tx, ty = rng.uniform(-trans_max, trans_max, size=2) / float(img_extent)

    c = 0.5 * (img_extent - 1.0) / img_extent
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    rot = np.array([[cos_t, -sin_t, 0.0], [sin_t, cos_t, 0.0], [0.0, 0.0, 1.0]])
    shr = np.array([[1.0, np.tan(shear), 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    to_c = np.array([[1.0, 0.0, c], [0.0, 1.0, c], [0.0, 0.0, 1.0]])
    from_c = np.array([[1.0, 0.0, -c], [0.0, 1.0, -c], [0.0, 0.0, 1.0]])
    trans = np.array([[1.0, 0.0, tx], [0.0, 1.0, ty], [0.0, 0.0, 1.0]])

    m = to_c @ rot @ shr @ from_c @ trans
    return AffineParams.from_matrix(m[:2])
