import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from comreg.exceptions import InsufficientCorrespondencesError
from comreg.filterbank import builtin_bank, extract_features
from comreg.keypoints import (
    KeypointSet,
    center_of_mass,
    extract_keypoints,
    keypoints_csv,
    pair_keypoints,
)
from comreg.raster import preprocess


def test_com_single_mass():
    m = np.array([[0.0, 0.0], [0.0, 4.0]], np.float32)
    x, y, valid = center_of_mass(m)
    assert (x, y, valid) == (1.0, 1.0, True)


def test_com_uniform_center():
    x, y, valid = center_of_mass(np.ones((5, 5), np.float32))
    assert (x, y, valid) == (2.0, 2.0, True)


def test_com_all_zero():
    x, y, valid = center_of_mass(np.zeros((3, 3), np.float32))
    assert (x, y, valid) == (0.0, 0.0, False)


def test_com_integer_translation():
    rng = np.random.default_rng(0)
    m = np.zeros((20, 20))
    m[4:9, 5:11] = rng.random((5, 6))
    x0, y0, _ = center_of_mass(m)
    shifted = np.zeros((20, 20))
    dx, dy = 6, 4
    shifted[4 + dy:9 + dy, 5 + dx:11 + dx] = m[4:9, 5:11]
    x1, y1, _ = center_of_mass(shifted)
    assert abs(x1 - (x0 + dx)) <= 1e-6
    assert abs(y1 - (y0 + dy)) <= 1e-6


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_com_inside_nonzero_bounding_box(seed):
    rng = np.random.default_rng(seed)
    m = (rng.random((8, 8)) * (rng.random((8, 8)) < 0.3)).astype(np.float32)
    x, y, valid = center_of_mass(m)
    if not valid:
        return
    ys, xs = np.nonzero(m)
    assert xs.min() - 1e-9 <= x <= xs.max() + 1e-9
    assert ys.min() - 1e-9 <= y <= ys.max() + 1e-9


def test_extract_keypoints_uniform_map():
    w = h = 12
    stack = np.zeros((128, h, w), np.float32)
    stack[0] = 1.0
    kps = extract_keypoints(stack, w)
    assert kps.valid[0]
    assert not kps.valid[1:].any()
    expected = 0.5 * (w - 1) / w
    assert np.allclose(kps.points[0], [expected, expected])


def test_extract_keypoints_all_zero():
    stack = np.zeros((128, 6, 6), np.float32)
    kps = extract_keypoints(stack, 6)
    assert not kps.valid.any()
    assert np.array_equal(kps.points, np.zeros((128, 2)))


def test_extract_keypoints_deterministic(bank):
    img = preprocess(np.random.default_rng(8).random((24, 24)).astype(np.float32), pad=4)
    a = extract_keypoints(extract_features(img, bank), max(img.shape))
    b = extract_keypoints(extract_features(img, bank), max(img.shape))
    assert np.array_equal(a.points, b.points)
    assert np.array_equal(a.valid, b.valid)


def test_extract_keypoints_extent_check():
    with pytest.raises(ValueError, match="extent"):
        extract_keypoints(np.zeros((128, 6, 6), np.float32), 7)


def test_keypoints_normalized_in_unit_square(bank):
    img = preprocess(np.random.default_rng(9).random((32, 32)).astype(np.float32), pad=0)
    kps = extract_keypoints(extract_features(img, bank), 32)
    pts = kps.points[kps.valid]
    assert np.all(pts >= 0.0) and np.all(pts <= 1.0)


def _kpset(points, valid):
    return KeypointSet(points=np.asarray(points, float), valid=np.asarray(valid, bool),
                       source_extent=10)


def test_pair_full_intersection():
    pts = np.random.default_rng(0).random((128, 2))
    a = _kpset(pts, np.ones(128))
    b = _kpset(pts + 0.01, np.ones(128))
    corr = pair_keypoints(a, b)
    assert len(corr) == 128
    assert np.array_equal(corr.indices, np.arange(128))


def test_pair_drops_invalid_index():
    pts = np.random.default_rng(1).random((128, 2))
    valid = np.ones(128, bool)
    valid[5] = False
    corr = pair_keypoints(_kpset(pts, valid), _kpset(pts, np.ones(128)))
    assert len(corr) == 127
    assert 5 not in corr.indices
    assert np.all(np.diff(corr.indices) > 0)


def test_pair_insufficient():
    pts = np.random.default_rng(2).random((128, 2))
    valid = np.zeros(128, bool)
    valid[:5] = True
    with pytest.raises(InsufficientCorrespondencesError):
        pair_keypoints(_kpset(pts, valid), _kpset(pts, valid))


def test_keypoints_csv_format():
    pts = np.zeros((128, 2))
    valid = np.ones(128, bool)
    text = keypoints_csv(_kpset(pts, valid), _kpset(pts, valid))
    lines = text.strip().splitlines()
    assert lines[0] == "index,fx,fy,mx,my,valid"
    assert len(lines) == 129
    assert lines[1].startswith("0,") and lines[1].endswith(",1")
