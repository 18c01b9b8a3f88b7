import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from PIL import Image

from comreg.exceptions import RasterFormatError
from comreg.raster import (
    AffineParams,
    compose,
    invert,
    lerp_identity,
    load_f32r,
    load_raster,
    preprocess,
    random_affine,
    rescale01,
    save_f32r,
    save_raster,
    warp_affine,
)


def make_rotation(theta: float, size: int) -> AffineParams:
    """Rotation about the image center in normalized coordinates."""
    c = 0.5 * (size - 1) / size
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    rot = np.array([[cos_t, -sin_t, 0.0], [sin_t, cos_t, 0.0], [0, 0, 1.0]])
    to_c = np.array([[1.0, 0, c], [0, 1.0, c], [0, 0, 1.0]])
    from_c = np.array([[1.0, 0, -c], [0, 1.0, -c], [0, 0, 1.0]])
    return AffineParams.from_matrix((to_c @ rot @ from_c)[:2])


# -- I/O ---------------------------------------------------------------------

def test_load_png_8bit_full_range(tmp_path):
    arr = np.array([[0, 255], [0, 255]], dtype=np.uint8)
    p = tmp_path / "t.png"
    Image.fromarray(arr, mode="L").save(p)
    img = load_raster(p)
    assert np.array_equal(img, [[0.0, 1.0], [0.0, 1.0]])


def test_load_png_16bit(tmp_path):
    arr = np.array([[0, 65535], [32768, 1]], dtype=np.uint16)
    p = tmp_path / "t16.png"
    Image.fromarray(arr).save(p)
    img = load_raster(p)
    assert img[0, 1] == 1.0
    assert img[0, 0] == 0.0
    assert abs(img[1, 0] - 32768 / 65535) < 1e-7


def test_load_png_color_channel_mean(tmp_path):
    arr = np.zeros((2, 2, 3), dtype=np.uint8)
    arr[..., 0] = 255  # red only
    p = tmp_path / "rgb.png"
    Image.fromarray(arr, mode="RGB").save(p)
    img = load_raster(p)
    assert np.allclose(img, 255 / 3 / 255)


def test_f32r_verbatim(tmp_path):
    p = tmp_path / "t.f32r"
    save_f32r(p, np.full((2, 2), 0.5, np.float32))
    img = load_f32r(p)
    assert np.array_equal(img, np.full((2, 2), 0.5, np.float32))


def test_f32r_truncated(tmp_path):
    p = tmp_path / "t.f32r"
    save_f32r(p, np.zeros((2, 2), np.float32))
    data = p.read_bytes()
    p.write_bytes(data[:-4])  # drop one float
    with pytest.raises(RasterFormatError, match="truncated"):
        load_f32r(p)


def test_f32r_bad_magic(tmp_path):
    p = tmp_path / "t.f32r"
    save_f32r(p, np.zeros((2, 2), np.float32))
    data = bytearray(p.read_bytes())
    data[0] = ord("X")
    p.write_bytes(bytes(data))
    with pytest.raises(RasterFormatError, match="magic"):
        load_f32r(p)


def test_load_missing_file(tmp_path):
    with pytest.raises(RasterFormatError, match="not found"):
        load_raster(tmp_path / "nope.png")


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 9), st.integers(1, 9), st.integers(0, 2 ** 31 - 1))
def test_f32r_round_trip(w, h, seed):
    import tempfile
    img = np.random.default_rng(seed).random((h, w)).astype(np.float32)
    with tempfile.TemporaryDirectory() as tmp:
        p = f"{tmp}/r.f32r"
        save_f32r(p, img)
        assert np.array_equal(load_f32r(p), img)


def test_save_raster_png_round_trip(tmp_path):
    img = np.linspace(0, 1, 16, dtype=np.float32).reshape(4, 4)
    p = tmp_path / "o.png"
    save_raster(p, img)
    back = load_raster(p)
    assert np.abs(back - img).max() <= 0.5 / 255 + 1e-7


# -- preprocess ---------------------------------------------------------------

def test_preprocess_constant_image():
    img = np.full((3, 3), 0.7, np.float32)
    out = preprocess(img, pad=0)
    assert out.shape == (3, 3)
    assert np.array_equal(out, np.zeros((3, 3), np.float32))


def test_preprocess_two_values():
    out = preprocess(np.array([[0.0, 2.0]], np.float32), pad=0)
    assert np.allclose(out, [[-1.0, 1.0]])


def test_preprocess_pad_geometry():
    img = np.array([[1.0, 2.0], [3.0, 4.0]], np.float32)
    out = preprocess(img, pad=1)
    assert out.shape == (4, 4)
    inner = preprocess(img, pad=0)
    assert np.array_equal(out[1:3, 1:3], inner)
    border = out.copy()
    border[1:3, 1:3] = 0
    assert np.array_equal(border, np.zeros((4, 4), np.float32))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_preprocess_standardizes(seed):
    rng = np.random.default_rng(seed)
    img = rng.random((11, 7)).astype(np.float32) * rng.uniform(0.5, 10)
    out = preprocess(img, pad=2).astype(np.float64)
    inner = out[2:-2, 2:-2]
    assert abs(inner.mean()) < 1e-6
    assert abs(inner.std() - 1.0) < 1e-6


# -- warping ------------------------------------------------------------------

def test_warp_identity_exact():
    rng = np.random.default_rng(0)
    img = rng.random((17, 23)).astype(np.float32)
    out = warp_affine(img, AffineParams.identity())
    assert np.array_equal(out, img)


def test_warp_one_pixel_translation():
    img = np.zeros((5, 5), np.float32)
    img[2, 3] = 1.0
    # backward mapping: sample position x + 1, so content shifts left
    params = AffineParams(1, 0, 0, 1, 1.0 / 5, 0)
    out = warp_affine(img, params)
    expected = np.zeros((5, 5), np.float32)
    expected[2, 2] = 1.0
    assert np.array_equal(out, expected)


def test_warp_out_of_bounds_zero():
    img = np.ones((4, 4), np.float32)
    params = AffineParams(1, 0, 0, 1, 10.0, 0.0)  # shifts far outside
    out = warp_affine(img, params)
    assert np.array_equal(out, np.zeros((4, 4), np.float32))


def test_warp_never_nan():
    rng = np.random.default_rng(3)
    img = rng.random((9, 9)).astype(np.float32)
    for seed in range(20):
        params = random_affine(seed, 30, 1.5, 0.5, 9)
        out = warp_affine(img, params)
        assert np.all(np.isfinite(out))


def test_warp_rotation_compose_oracle():
    # two bilinear 90-degree passes vs one 180-degree pass
    rng = np.random.default_rng(5)
    img = rng.random((65, 65))
    k = np.array([1.0, 4.0, 6.0, 4.0, 1.0]) / 16
    img = np.apply_along_axis(lambda r: np.convolve(r, k, "same"), 0, img)
    img = np.apply_along_axis(lambda r: np.convolve(r, k, "same"), 1, img).astype(np.float32)
    img[10:20, 30:50] += 1.0  # asymmetric content

    r90 = make_rotation(np.pi / 2, 65)
    r180 = make_rotation(np.pi, 65)
    twice = warp_affine(warp_affine(img, r90), r90)
    once = warp_affine(img, r180)
    assert np.abs(twice.astype(np.float64) - once).max() <= 2e-2


def test_compose_matches_matrix_product():
    a = random_affine(1, 10, 0.3, 0.03, 100)
    b = random_affine(2, 10, 0.3, 0.03, 100)
    ab = compose(a, b)
    lifted = np.vstack([a.to_matrix(), [0, 0, 1]]) @ np.vstack([b.to_matrix(), [0, 0, 1]])
    assert np.allclose(ab.to_matrix(), lifted[:2], atol=1e-15)


def test_invert_round_trip():
    p = random_affine(9, 20, 0.3, 0.03, 128)
    round_trip = compose(p, invert(p))
    assert round_trip.max_deviation_from_identity() < 1e-12


def test_lerp_identity_endpoints():
    p = AffineParams(0.9, 0.1, -0.2, 1.1, 0.05, -0.03)
    assert lerp_identity(p, 1.0) is p
    assert lerp_identity(p, 0.0).max_deviation_from_identity() == 0.0
    mid = lerp_identity(p, 0.5)
    assert np.allclose(mid.as_array(), (p.as_array() + AffineParams.identity().as_array()) / 2)


# -- random_affine ------------------------------------------------------------

def test_random_affine_zero_bounds_identity():
    p = random_affine(0, 0, 0, 0, 100)
    assert p.max_deviation_from_identity() == 0.0


def test_random_affine_translation_bound():
    for seed in range(50):
        p = random_affine(seed, 50, 0, 0, 500)
        assert abs(p.tx) <= 0.1 and abs(p.ty) <= 0.1
        assert p.a11 == 1.0 and p.a22 == 1.0


def test_random_affine_deterministic():
    a = random_affine(42, 50, 0.3, 0.03, 368)
    b = random_affine(42, 50, 0.3, 0.03, 368)
    assert a == b


def test_random_affine_bounds_sweep():
    trans_max, rot_max, shear_max, extent = 50.0, 0.3, 0.03, 368.0
    c = 0.5 * (extent - 1.0) / extent
    for seed in range(1000):
        p = random_affine(seed, trans_max, rot_max, shear_max, extent)
        a = p.to_matrix()[:, :2]
        theta = np.arctan2(a[1, 0], a[0, 0])
        assert abs(theta) <= rot_max + 1e-12
        shear = np.arctan((a[0, 1] + np.sin(theta)) / np.cos(theta))
        assert abs(shear) <= shear_max + 1e-12
        b = p.to_matrix()[:, 2]
        t = np.linalg.solve(a, b - c + a @ [c, c])
        assert np.all(np.abs(t) <= trans_max / extent + 1e-12)


def test_rescale01():
    img = np.array([[2.0, 4.0]], np.float32)
    assert np.allclose(rescale01(img), [[0.0, 1.0]])
    assert np.array_equal(rescale01(np.full((2, 2), 3.0, np.float32)), np.zeros((2, 2)))
