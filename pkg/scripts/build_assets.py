"""Build the packaged assets: trained regressor and demo phantom pair.

Run from the repository root:
    python scripts/build_assets.py [--quick]
"""

import argparse
import sys
import time
from pathlib import Path

import numpy as np

DATA_DIR = Path(__file__).resolve().parents[1] / "src" / "comreg" / "data"


def train_model(quick: bool):
    from comreg.regressor import TransformRegressor, save_regressor

    if quick:
        model = TransformRegressor(n_samples=100_000, n_passes=10, seed=0)
    else:
        model = TransformRegressor(
            hidden_sizes=(512, 256, 128),
            n_samples=800_000,
            n_passes=96,
            cluster_frac=0.15,
            small_frac=0.3,
            seed=0,
        )
    t0 = time.perf_counter()
    model.fit()
    print(f"trained in {time.perf_counter() - t0:.0f} s, val_rmse {model.val_rmse_:.5f}")
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    save_regressor(DATA_DIR / "regressor.zrm", model)

    with open(DATA_DIR / "train_log.csv", "w") as fh:
        fh.write("epoch,loss\n")
        for epoch, loss in enumerate(model.epoch_losses_, 1):
            fh.write(f"{epoch},{loss:.8g}\n")
    return model


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--quick", action="store_true", help="small training run")
    args = parser.parse_args()
    train_model(args.quick)
    print(f"assets written to {DATA_DIR}")


if __name__ == "__main__":
    sys.exit(main())
