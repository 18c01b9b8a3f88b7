"""Center-of-mass keypoints from thresholded feature maps.

One keypoint per feature map: the intensity-weighted mean position of
the map after thresholding. Fixed and moving keypoints correspond by
filter index, so no matching step is needed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientCorrespondencesError
from .filterbank import threshold_map

MIN_VALID_PAIRS = 8


@dataclass(frozen=True)
class KeypointSet:
    """Normalized keypoints, one per feature map.

    ``points`` is (n, 2) with columns (x, y) in units of
    ``source_extent`` pixels; ``valid[i]`` is False when map i was
    all-zero after thresholding (its point is (0, 0)).
    """

    points: np.ndarray
    valid: np.ndarray
    source_extent: int

    def __len__(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class Correspondences:
    """Index-paired fixed/moving keypoints, both (n, 2), n >= 8."""

    fixed: np.ndarray
    moving: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return len(self.indices)


def center_of_mass(feature_map: np.ndarray) -> tuple[float, float, bool]:
    """Intensity-weighted mean position in pixel coordinates.

    Returns (x, y, valid); an all-zero map yields (0, 0, False).
    """
    m = np.asarray(feature_map, dtype=np.float64)
    total = m.sum()
    if total <= 0.0:
        return 0.0, 0.0, False
    h, w = m.shape
    col_mass = m.sum(axis=0)
    row_mass = m.sum(axis=1)
    x = float(col_mass @ np.arange(w) / total)
    y = float(row_mass @ np.arange(h) / total)
    return x, y, True


def extract_keypoints(stack: np.ndarray, extent: int, threshold_frac: float = 0.95) -> KeypointSet:
    """Threshold each map, take its center of mass, normalize by ``extent``.

    ``extent`` must be max(width, height) of the maps so coordinates
    keep the image aspect ratio.
    """
    stack = np.asarray(stack)
    if stack.ndim != 3:
        raise ValueError(f"feature stack must be (n, H, W), got {stack.shape}")
    h, w = stack.shape[1:]
    if extent != max(h, w):
        raise ValueError(f"extent {extent} does not match map size {w}x{h}")
    n = stack.shape[0]
    points = np.zeros((n, 2), dtype=np.float64)
    valid = np.zeros(n, dtype=bool)
    for i in range(n):
        x, y, ok = center_of_mass(threshold_map(stack[i], threshold_frac))
        if ok:
            points[i] = (x / extent, y / extent)
            valid[i] = True
    return KeypointSet(points=points, valid=valid, source_extent=int(extent))


def pair_keypoints(fixed: KeypointSet, moving: KeypointSet) -> Correspondences:
    """Keep indices where both sets are valid, in filter-index order."""
    if len(fixed) != len(moving):
        raise ValueError(f"keypoint set sizes differ: {len(fixed)} vs {len(moving)}")
    both = fixed.valid & moving.valid
    indices = np.flatnonzero(both)
    if len(indices) < MIN_VALID_PAIRS:
        raise InsufficientCorrespondencesError(
            f"only {len(indices)} valid keypoint pairs, need >= {MIN_VALID_PAIRS}"
        )
    return Correspondences(
        fixed=fixed.points[indices].copy(),
        moving=moving.points[indices].copy(),
        indices=indices,
    )


def keypoints_csv(fixed: KeypointSet, moving: KeypointSet) -> str:
    """Debug dump: one "index,fx,fy,mx,my,valid" line per filter."""
    lines = ["index,fx,fy,mx,my,valid"]
    for i in range(len(fixed)):
        ok = bool(fixed.valid[i] and moving.valid[i])
        lines.append(
            f"{i},{fixed.points[i, 0]:.8f},{fixed.points[i, 1]:.8f},"
            f"{moving.points[i, 0]:.8f},{moving.points[i, 1]:.8f},{int(ok)}"
        )
    return "\n".join(lines) + "\n"
