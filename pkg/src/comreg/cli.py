"""Command-line interface: register, train, evaluate, bench.

Every command is deterministic for a given --seed and writes only under
--out-dir. Set COMREG_NUM_THREADS to pin the BLAS thread count (it must
be applied before numpy is imported, which is why the heavy modules are
loaded lazily inside the command handlers).
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
import time
from pathlib import Path

RESULT_SCHEMA_VERSION = 1

# Published comparison deltas for this registration approach
# (change after - before, plus seconds per image).
REFERENCE_ROW = {"dice": 0.294, "mi": 0.373, "ssim": 0.431, "mse": -0.072, "time_s": 0.2}

IMAGE_SUFFIXES = (".png", ".f32r")


def _apply_thread_env() -> None:
    threads = os.environ.get("COMREG_NUM_THREADS")
    if threads:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ.setdefault(var, threads)


def _out_dir(args) -> Path:
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        print(f"error: {what} file not found: {p}", file=sys.stderr)
        raise SystemExit(2)
    return p


def _load_model_and_bank(args):
    from .assets import default_bank, default_model, default_model_path
    from .filterbank import load_filter_bank
    from .regressor import load_regressor

    if args.model:
        model = load_regressor(_require_file(args.model, "model"))
    else:
        if not default_model_path().is_file():
            print(f"error: model file not found: {default_model_path()}", file=sys.stderr)
            raise SystemExit(2)
        model = default_model()
    bank = load_filter_bank(_require_file(args.bank, "filter bank")) if args.bank \
        else default_bank()
    return model, bank


def _write_result_doc(path: Path, command: str, fields: dict) -> None:
    lines = [f"schema_version = {RESULT_SCHEMA_VERSION}", f"command = {command}"]
    for key, value in fields.items():
        if isinstance(value, float):
            lines.append(f"{key} = {value:.9g}")
        else:
            lines.append(f"{key} = {value}")
    path.write_text("\n".join(lines) + "\n")


def _params_fields(params) -> dict:
    return {
        "a11": params.a11, "a12": params.a12, "tx": params.tx,
        "a21": params.a21, "a22": params.a22, "ty": params.ty,
    }


def _metric_fields(report, suffix: str) -> dict:
    return {f"{name}_{suffix}": value for name, value in report.as_dict().items()}


# --------------------------------------------------------------------------
# register
# --------------------------------------------------------------------------

def cmd_register(args) -> int:
    import numpy as np

    from .keypoints import keypoints_csv
    from .raster import load_raster, rescale01, save_raster, save_f32r
    from .registration import RegistrationResult, iterative_register, register, warp_cropped
    from .uncertainty import estimate_uncertainty

    fixed = load_raster(_require_file(args.fixed, "fixed image"))
    moving = load_raster(_require_file(args.moving, "moving image"))
    model, bank = _load_model_and_bank(args)
    out = _out_dir(args)

    t0 = time.perf_counter()
    result = register(
        fixed, moving, model, bank,
        threshold_frac=args.threshold_frac, pad=args.pad, seed=args.seed,
        fg_threshold=args.fg_threshold,
    )
    params = result.params
    warped = result.warped
    if args.iterative:
        params = iterative_register(
            fixed, moving, model, bank,
            lr=args.lr, max_iters=args.max_iters,
            threshold_frac=args.threshold_frac, pad=args.pad, seed=args.seed,
        )
        moving01 = rescale01(moving)
        padded = np.pad(moving01, args.pad) if args.pad else moving01
        warped = warp_cropped(padded, params, args.pad, fixed.shape)
        from .metrics import compute_all
        result = RegistrationResult(
            params=params, warped=warped,
            metrics_before=result.metrics_before,
            metrics_after=compute_all(rescale01(fixed), warped, args.fg_threshold),
            elapsed_ms=(time.perf_counter() - t0) * 1e3,
            n_pairs=result.n_pairs, stage_ms=result.stage_ms,
        )

    save_raster(out / "warped.png", warped)
    save_f32r(out / "warped.f32r", warped)

    fields: dict = {"fixed": args.fixed, "moving": args.moving}
    fields.update(_params_fields(params))
    fields.update(_metric_fields(result.metrics_before, "before"))
    fields.update(_metric_fields(result.metrics_after, "after"))
    fields["n_pairs"] = result.n_pairs
    fields["elapsed_ms"] = result.elapsed_ms
    for stage, ms in result.stage_ms.items():
        fields[f"stage_{stage}_ms"] = ms

    if args.dump_keypoints:
        from .filterbank import extract_features
        from .keypoints import extract_keypoints
        from .raster import preprocess
        fixed_prep = preprocess(fixed, args.pad)
        moving_prep = preprocess(moving, args.pad)
        extent = max(fixed_prep.shape)
        kf = extract_keypoints(extract_features(fixed_prep, bank), extent, args.threshold_frac)
        km = extract_keypoints(extract_features(moving_prep, bank), extent, args.threshold_frac)
        (out / "keypoints.csv").write_text(keypoints_csv(kf, km))

    if args.uncertainty:
        report = estimate_uncertainty(
            fixed, moving, model, bank,
            n=args.n, fraction=args.blacken_frac, seed=args.seed,
            threshold_frac=args.threshold_frac, pad=args.pad,
        )
        save_f32r(out / "variance_map.f32r", report.variance_map)
        save_raster(out / "variance_map.png", rescale01(report.variance_map))
        names = ("a11", "a12", "tx", "a21", "a22", "ty")
        for name, var in zip(names, report.param_variance):
            fields[f"var_{name}"] = float(var)
        fields["uncertainty_trials"] = report.n_trials

    _write_result_doc(out / "result.txt", "register", fields)
    print(f"registered: dice {result.metrics_before.dice:.4f} -> "
          f"{result.metrics_after.dice:.4f} in {result.elapsed_ms:.0f} ms")
    return 0


# --------------------------------------------------------------------------
# train
# --------------------------------------------------------------------------

def cmd_train(args) -> int:
    from .regressor import TransformRegressor, save_regressor

    out = _out_dir(args)
    hidden = tuple(int(h) for h in args.hidden.split(",") if h)
    model = TransformRegressor(
        hidden_sizes=hidden,
        n_samples=args.samples,
        n_passes=args.epochs,
        batch_size=args.batch_size,
        learning_rate=args.learning_rate,
        lr_decay=args.lr_decay,
        cluster_frac=args.cluster_frac,
        small_frac=args.small_frac,
        tail_weight=args.tail_weight,
        seed=args.seed,
    )
    t0 = time.perf_counter()
    model.fit()
    train_s = time.perf_counter() - t0

    model_path = out / "model.zrm"
    save_regressor(model_path, model)

    with open(out / "train_log.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "loss"])
        if not model.epoch_losses_:
            writer.writerow([0, "untrained"])
        for epoch, loss in enumerate(model.epoch_losses_, 1):
            writer.writerow([epoch, f"{loss:.8g}"])

    status = "untrained" if not model.epoch_losses_ else f"val_rmse {model.val_rmse_:.5f}"
    print(f"wrote {model_path} ({status}, {train_s:.0f} s)")
    return 0


# --------------------------------------------------------------------------
# evaluate
# --------------------------------------------------------------------------

def _corpus_images(args):
    from .phantom import make_phantom
    from .raster import load_raster

    if args.synthetic:
        for i in range(args.synthetic):
            yield f"phantom_{i:04d}", make_phantom(args.seed * 100_003 + i, margin=64)
    else:
        corpus = Path(args.corpus)
        files = sorted(p for p in corpus.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES)
        for p in files:
            yield p.stem, load_raster(p)


def cmd_evaluate(args) -> int:
    import numpy as np

    from .metrics import MetricReport
    from .raster import random_affine, warp_affine
    from .registration import register

    if not args.synthetic and not args.corpus:
        print("error: provide --corpus DIR or --synthetic N", file=sys.stderr)
        return 2
    if args.corpus and not Path(args.corpus).is_dir():
        print(f"error: corpus directory not found: {args.corpus}", file=sys.stderr)
        return 2

    model, bank = _load_model_and_bank(args)
    out = _out_dir(args)

    rows = []
    for index, (name, fixed) in enumerate(_corpus_images(args)):
        induced = random_affine(
            args.seed * 7_919 + index,
            args.trans_max, args.rot_max, args.shear_max,
            max(fixed.shape),
        )
        moving = warp_affine(fixed, induced)
        t0 = time.perf_counter()
        result = register(
            fixed, moving, model, bank,
            threshold_frac=args.threshold_frac, pad=args.pad,
            seed=args.seed * 104_729 + index, fg_threshold=args.fg_threshold,
        )
        wall_s = time.perf_counter() - t0
        before, after = result.metrics_before, result.metrics_after
        rows.append({
            "case": name,
            "dice_before": before.dice, "dice_after": after.dice,
            "ssim_before": before.ssim, "ssim_after": after.ssim,
            "mi_before": before.mi, "mi_after": after.mi,
            "mse_before": before.mse, "mse_after": after.mse,
            "time_s": wall_s,
        })

    if not rows:
        print("error: corpus is empty", file=sys.stderr)
        return 2

    with open(out / "per_case.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)

    def col(key):
        return np.array([r[key] for r in rows])

    deltas = {m: float(np.mean(col(f"{m}_after") - col(f"{m}_before")))
              for m in ("dice", "mi", "ssim", "mse")}
    mean_time = float(np.mean(col("time_s")))

    header = f"{'technique':<22}{'dDice':>9}{'dMI':>9}{'dSSIM':>9}{'dMSE':>9}{'time/img s':>12}"
    ours = (f"{'this pipeline':<22}{deltas['dice']:>+9.3f}{deltas['mi']:>+9.3f}"
            f"{deltas['ssim']:>+9.3f}{deltas['mse']:>+9.3f}{mean_time:>12.2f}")
    ref = (f"{'published reference':<22}{REFERENCE_ROW['dice']:>+9.3f}{REFERENCE_ROW['mi']:>+9.3f}"
           f"{REFERENCE_ROW['ssim']:>+9.3f}{REFERENCE_ROW['mse']:>+9.3f}"
           f"{REFERENCE_ROW['time_s']:>12.2f}")
    improved = int(np.sum(col("dice_after") > col("dice_before")))
    summary = "\n".join([
        f"cases = {len(rows)}",
        f"dice_improved = {improved}/{len(rows)}",
        header, ours, ref,
    ])
    (out / "summary.txt").write_text(summary + "\n")
    print(summary)
    return 0


# --------------------------------------------------------------------------
# bench
# --------------------------------------------------------------------------

def cmd_bench(args) -> int:
    import numpy as np

    from .phantom import make_phantom
    from .raster import random_affine, warp_affine
    from .registration import register

    model, bank = _load_model_and_bank(args)
    out = _out_dir(args)

    records = []
    for size in args.sizes:
        fixed = make_phantom(args.seed, size=size, margin=0)
        induced = random_affine(args.seed + 1, min(20.0, size / 12), 0.1, 0.01, size)
        moving = warp_affine(fixed, induced)
        lat = []
        stage_acc: dict[str, list] = {}
        for rep in range(args.repeats):
            result = register(
                fixed, moving, model, bank,
                threshold_frac=args.threshold_frac, pad=args.pad,
                seed=args.seed + rep,
            )
            lat.append(result.elapsed_ms)
            for stage, ms in result.stage_ms.items():
                stage_acc.setdefault(stage, []).append(ms)
        med = float(np.median(lat))
        p95 = float(np.quantile(lat, 0.95))
        rec = {"size": size, "median_ms": med, "p95_ms": p95}
        for stage, vals in stage_acc.items():
            rec[f"{stage}_median_ms"] = float(np.median(vals))
        records.append(rec)
        stages = "  ".join(f"{k.replace('_median_ms','')}={v:.0f}" for k, v in rec.items()
                           if k.endswith("_median_ms"))
        print(f"{size}x{size}: median {med:.0f} ms  p95 {p95:.0f} ms  [{stages}]")

    with open(out / "bench.csv", "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(records[0]))
        writer.writeheader()
        writer.writerows(records)
    return 0


# --------------------------------------------------------------------------
# parser
# --------------------------------------------------------------------------

def _add_pipeline_opts(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", help="regressor .zrm file (default: packaged model)")
    p.add_argument("--bank", help="filter bank .zrw file (default: built-in kernels)")
    p.add_argument("--threshold-frac", type=float, default=0.95,
                   help="feature map activation threshold fraction")
    p.add_argument("--pad", type=int, default=64, help="zero padding per side")
    p.add_argument("--fg-threshold", type=float, default=0.0,
                   help="dice foreground threshold on [0,1]-rescaled images")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", default="comreg_out")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="comreg",
        description="Training-free affine image registration from "
                    "convolutional center-of-mass keypoints.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_reg = sub.add_parser("register", help="register a moving image onto a fixed image")
    p_reg.add_argument("--fixed", required=True)
    p_reg.add_argument("--moving", required=True)
    _add_pipeline_opts(p_reg)
    p_reg.add_argument("--iterative", action="store_true",
                       help="iterative estimation with a residual learning rate")
    p_reg.add_argument("--lr", type=float, default=0.5, help="iterative step fraction")
    p_reg.add_argument("--max-iters", type=int, default=10)
    p_reg.add_argument("--uncertainty", action="store_true",
                       help="bootstrap uncertainty via pixel blackening")
    p_reg.add_argument("--n", type=int, default=10, help="uncertainty trials")
    p_reg.add_argument("--blacken-frac", type=float, default=0.05)
    p_reg.add_argument("--dump-keypoints", action="store_true")
    p_reg.set_defaults(func=cmd_register)

    p_train = sub.add_parser("train", help="train the transform regressor")
    p_train.add_argument("--samples", type=int, default=500_000)
    p_train.add_argument("--epochs", type=int, default=20, help="passes over --samples")
    p_train.add_argument("--batch-size", type=int, default=256)
    p_train.add_argument("--learning-rate", type=float, default=1e-3)
    p_train.add_argument("--lr-decay", choices=("cosine", "constant"), default="cosine")
    p_train.add_argument("--hidden", default="256,128,64")
    p_train.add_argument("--cluster-frac", type=float, default=0.2)
    p_train.add_argument("--small-frac", type=float, default=0.3)
    p_train.add_argument("--tail-weight", type=float, default=300.0)
    p_train.add_argument("--seed", type=int, default=0)
    p_train.add_argument("--out-dir", default="comreg_out")
    p_train.set_defaults(func=cmd_train)

    p_eval = sub.add_parser("evaluate", help="synthetic-recovery evaluation harness")
    p_eval.add_argument("--corpus", help="directory of .png/.f32r images")
    p_eval.add_argument("--synthetic", type=int, default=0, metavar="N",
                        help="generate N phantoms instead of reading a corpus")
    p_eval.add_argument("--trans-max", type=float, default=50.0, help="pixels")
    p_eval.add_argument("--rot-max", type=float, default=0.3, help="radians")
    p_eval.add_argument("--shear-max", type=float, default=0.03, help="radians")
    _add_pipeline_opts(p_eval)
    p_eval.set_defaults(func=cmd_evaluate)

    p_bench = sub.add_parser("bench", help="latency benchmark with stage breakdown")
    p_bench.add_argument("--sizes", type=int, nargs="+", default=[240, 480])
    p_bench.add_argument("--repeats", type=int, default=9)
    _add_pipeline_opts(p_bench)
    p_bench.set_defaults(func=cmd_bench)

    return parser


def main(argv=None) -> int:
    _apply_thread_env()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except Exception as exc:
        from .exceptions import ComregError

        if isinstance(exc, ComregError):
            print(f"error: {exc}", file=sys.stderr)
            return 1
        raise


if __name__ == "__main__":
    sys.exit(main())
