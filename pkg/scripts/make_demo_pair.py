"""Pick and ship a demonstration phantom pair.

Searches seeds for a pair whose pre-registration dice sits near the
low-overlap regime (<= 0.44) and whose post-registration dice clears
0.87, then writes both images into the package data directory.
"""

import sys
from pathlib import Path

import numpy as np

from comreg.assets import default_bank, default_model
from comreg.phantom import make_phantom
from comreg.raster import AffineParams, save_raster, warp_affine
from comreg.registration import register

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "comreg" / "data"


def candidate(seed: int):
    rng = np.random.default_rng(seed)
    fixed = make_phantom(rng.integers(2 ** 63), size=240, margin=64)
    extent = max(fixed.shape)
    # a strong but in-bounds deformation: near-max translation plus
    # rotation, so the starting overlap is poor
    tx, ty = rng.uniform(35, 50, 2) * rng.choice([-1, 1], 2) / extent
    theta = rng.uniform(0.18, 0.3) * rng.choice([-1, 1])
    c = 0.5 * (extent - 1) / extent
    cos_t, sin_t = np.cos(theta), np.sin(theta)
    rot = np.array([[cos_t, -sin_t, 0], [sin_t, cos_t, 0], [0, 0, 1.0]])
    to_c = np.array([[1, 0, c], [0, 1, c], [0, 0, 1.0]])
    from_c = np.array([[1, 0, -c], [0, 1, -c], [0, 0, 1.0]])
    trans = np.array([[1, 0, tx], [0, 1, ty], [0, 0, 1.0]])
    params = AffineParams.from_matrix((to_c @ rot @ from_c @ trans)[:2])
    moving = warp_affine(fixed, params)
    return fixed, moving


def main():
    model = default_model()
    bank = default_bank()
    for seed in range(200):
        fixed, moving = candidate(seed)
        result = register(fixed, moving, model, bank, seed=0)
        before = result.metrics_before.dice
        after = result.metrics_after.dice
        print(f"seed {seed}: dice {before:.3f} -> {after:.3f}")
        if 0.38 <= before <= 0.44 and after >= 0.87:
            DATA_DIR.mkdir(parents=True, exist_ok=True)
            save_raster(DATA_DIR / "demo_fixed.png", fixed)
            save_raster(DATA_DIR / "demo_moving.png", moving)
            print(f"shipped pair from seed {seed}")
            return 0
    print("no suitable pair found", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
