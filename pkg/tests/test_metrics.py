import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comreg.metrics import compute_all, dice, mse, mutual_information, ssim


def test_dice_identical_masks():
    img = np.zeros((6, 6), np.float32)
    img[2:4, 2:4] = 1.0
    assert dice(img, img.copy()) == 1.0


def test_dice_disjoint():
    a = np.zeros((6, 6), np.float32)
    b = np.zeros((6, 6), np.float32)
    a[0, 0:3] = 1.0
    b[5, 0:3] = 1.0
    assert dice(a, b) == 0.0


def test_dice_partial_overlap():
    a = np.zeros((4, 4), np.float32)
    b = np.zeros((4, 4), np.float32)
    a[0, :] = 1.0          # 4 px
    b[0, 2:] = 1.0         # overlap 2
    b[1, :2] = 1.0         # 4 px total
    assert dice(a, b) == pytest.approx(2 * 2 / (4 + 4))


def test_dice_both_empty():
    z = np.zeros((3, 3), np.float32)
    assert dice(z, z.copy()) == 1.0


def test_dice_dimension_mismatch():
    with pytest.raises(ValueError, match="mismatch"):
        dice(np.zeros((2, 2), np.float32), np.zeros((3, 3), np.float32))


def test_ssim_self_similarity():
    img = np.random.default_rng(0).random((32, 32)).astype(np.float32)
    assert abs(ssim(img, img.copy()) - 1.0) <= 1e-9


def test_ssim_negative_image_low():
    rng = np.random.default_rng(1)
    img = (rng.random((48, 48)) > 0.5).astype(np.float32)  # high contrast
    assert ssim(img, 1.0 - img) < 0.2


def test_ssim_constant_images():
    a = np.full((16, 16), 0.5, np.float32)
    assert ssim(a, a.copy()) == pytest.approx(1.0, abs=1e-12)


def test_ssim_window_guard():
    with pytest.raises(ValueError, match="window"):
        ssim(np.zeros((4, 4), np.float32), np.zeros((4, 4), np.float32))


def test_mi_self_equals_entropy():
    bins = 32
    # exactly equal counts in every bin
    values = np.repeat(np.arange(bins) / (bins - 1), 32).astype(np.float32)
    img = values.reshape(32, 32)
    assert abs(mutual_information(img, img.copy(), bins) - np.log2(bins)) <= 1e-9


def test_mi_constant_zero():
    c = np.full((8, 8), 0.4, np.float32)
    r = np.random.default_rng(2).random((8, 8)).astype(np.float32)
    assert mutual_information(c, r) == 0.0


def test_mi_independent_images_low():
    # Monte-Carlo independence baseline
    vals = []
    for seed in range(20):
        rng = np.random.default_rng(seed)
        a = rng.random((64, 64)).astype(np.float32)
        b = rng.random((64, 64)).astype(np.float32)
        vals.append(mutual_information(a, b, bins=32))
    assert max(vals) <= 0.3


def test_mi_invariant_to_affine_intensity_change():
    rng = np.random.default_rng(3)
    a = rng.random((32, 32)).astype(np.float32)
    b = rng.random((32, 32)).astype(np.float32)
    assert mutual_information(a, b) == pytest.approx(
        mutual_information(a, (0.5 * b + 0.1).astype(np.float32)), abs=1e-12
    )


def test_mse_examples():
    a = np.zeros((2, 2), np.float32)
    assert mse(a, a.copy()) == 0.0
    assert mse(a, a + 1.0) == 1.0
    b = np.zeros((2, 2), np.float32)
    b[0, 0] = 1.0
    assert mse(a, b) == 0.25


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_metrics_symmetry(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((16, 16)).astype(np.float32)
    b = rng.random((16, 16)).astype(np.float32)
    assert dice(a, b) == dice(b, a)
    assert mse(a, b) == mse(b, a)
    assert mutual_information(a, b) == pytest.approx(mutual_information(b, a), abs=1e-12)
    assert ssim(a, b) == pytest.approx(ssim(b, a), abs=1e-9)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_mse_zero_iff_equal(seed):
    rng = np.random.default_rng(seed)
    a = rng.random((6, 6)).astype(np.float32)
    b = a.copy()
    assert mse(a, b) == 0.0
    b[rng.integers(0, 6), rng.integers(0, 6)] += 0.5
    assert mse(a, b) > 0.0


def test_compute_all_report_fields():
    img = np.random.default_rng(4).random((16, 16)).astype(np.float32)
    report = compute_all(img, img.copy())
    d = report.as_dict()
    assert set(d) == {"dice", "ssim", "mi", "mse"}
    assert d["dice"] == 1.0 and d["mse"] == 0.0
    assert 0.0 <= d["ssim"] <= 1.0 and d["mi"] >= 0.0
