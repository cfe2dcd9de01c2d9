"""Command-line entry point: synth, train, eval, ablate, plot.

Exit codes: 0 success, 1 validation error, 2 IO error, 3 numeric failure.
Set STR_THREADS to cap the BLAS thread pool.
"""

from __future__ import annotations

import argparse
import contextlib
import csv
import io
import logging
import os
import sys
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import ConfigError, RunConfig, load_config
from .model import VARIANTS
from .numerics import NumericError
from .numerics.container import ContainerError, atomic_write_bytes
from .training.metrics import MetricsReport, second_difference
from .training.synth import Dataset, gen_synthetic_dataset
from .training.trainer import (AblationRow, EpochLog, Trainer, body_from_config, build_model,
                               check_compatible, evaluate_predictions, load_predictions,
                               oracle_predictions, predict, run_ablation, save_predictions,
                               synth_config)

log = logging.getLogger("strnet")

EXIT_OK, EXIT_VALIDATION, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3
HELDOUT_SEED_OFFSET = 1000


class ValidationError(ValueError):
    pass


def write_csv(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    atomic_write_bytes(path, buf.getvalue().encode())


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    return cfg


def _dataset(path, cfg: RunConfig | None = None) -> Dataset:
    ds = Dataset.load(path)
    if cfg is not None:
        check_compatible(cfg, ds)
    return ds


# -- commands ----------------------------------------------------------------

def cmd_synth(args) -> int:
    cfg = _config(args)
    ds = gen_synthetic_dataset(cfg.seed, body_from_config(cfg), synth_config(cfg))
    ds.save(args.out)
    dropped = int(ds.dropout.any(axis=1).sum()) if len(ds) else 0
    frac = float(ds.dropout.mean()) if len(ds) else 0.0
    print(f"sequences {cfg.data.num_sequences}  windows {len(ds)}  T {cfg.T}  C {cfg.C}")
    print(f"dropout windows {dropped}  dropped frame fraction {frac:.4f}")
    print(f"wrote {args.out}")
    return EXIT_OK


def cmd_train(args) -> int:
    if args.checkpoint:
        trainer, variant = Trainer.load(args.checkpoint)
        cfg = trainer.cfg
        if args.variant and args.variant != variant:
            raise ValidationError(f"checkpoint was trained as {variant!r}, not {args.variant!r}")
    else:
        cfg = _config(args)
        variant = args.variant or "full"
        trainer = Trainer(build_model(cfg, variant=variant), cfg)
    train = _dataset(args.dataset, cfg)
    val = _dataset(args.val_dataset, cfg) if args.val_dataset else None
    epochs = cfg.optim.epochs if args.epochs is None else args.epochs
    if epochs < 0:
        raise ValidationError("--epochs must be >= 0")
    log_path = args.log or str(Path(args.out).with_suffix(".log.csv"))
    rows = []
    if args.checkpoint and Path(log_path).exists():
        with open(log_path) as fh:
            rows = list(csv.reader(fh))[1:]

    def on_epoch(entry: EpochLog) -> None:
        rows.append(entry.row())
        print(",".join(entry.row()), flush=True)

    print(",".join(EpochLog.HEADER))
    trainer.fit(train, epochs, val, on_epoch)
    trainer.save(args.out, variant)
    write_csv(log_path, EpochLog.HEADER, rows)
    print(f"wrote {args.out} (epoch {trainer.epoch}) and {log_path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    if args.oracle_gt:
        ds = _dataset(args.dataset)
        if len(ds) == 0:
            raise ValidationError("cannot evaluate on an empty dataset")
        pred = oracle_predictions(ds)
    else:
        if not args.checkpoint:
            raise ValidationError("eval needs --checkpoint (or --oracle-gt)")
        trainer, _ = Trainer.load(args.checkpoint)
        ds = _dataset(args.dataset, trainer.cfg)
        if len(ds) == 0:
            raise ValidationError("cannot evaluate on an empty dataset")
        pred = predict(trainer.model, ds)
    report = evaluate_predictions(pred, ds)
    write_csv(args.out, MetricsReport.FIELDS, [report.row()])
    if args.predictions:
        save_predictions(args.predictions, pred, ds)
    print(",".join(MetricsReport.FIELDS))
    print(",".join(report.row()))
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _config(args)
    train = _dataset(args.dataset, cfg)
    if args.eval_dataset:
        val = _dataset(args.eval_dataset, cfg)
    else:
        val = gen_synthetic_dataset(cfg.seed + HELDOUT_SEED_OFFSET, body_from_config(cfg),
                                    synth_config(cfg))
    if len(val) == 0:
        raise ValidationError("the held-out set is empty")
    variants = args.variant or list(VARIANTS)
    unknown = [v for v in variants if v not in VARIANTS]
    if unknown:
        raise ValidationError(f"unknown variant(s) {unknown}; choose from {', '.join(VARIANTS)}")
    rows = run_ablation(cfg, train, val, variants, epochs=args.epochs)
    write_csv(args.out, AblationRow.HEADER, [r.row() for r in rows])
    print(",".join(AblationRow.HEADER))
    for r in rows:
        print(",".join(r.row()))
    return EXIT_OK


def accel_series(pred_j3d: np.ndarray, gt_j3d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-frame acceleration error and gt acceleration magnitude, ``frames - 2`` rows."""
    if len(gt_j3d) < 3:
        raise ValidationError(f"sequence has {len(gt_j3d)} frames, need at least 3")
    a_pred, a_gt = second_difference(pred_j3d), second_difference(gt_j3d)
    err = np.linalg.norm(a_pred - a_gt, axis=-1).mean(axis=-1)
    mag = np.linalg.norm(a_gt, axis=-1).mean(axis=-1)
    return err, mag


def cmd_plot(args) -> int:
    arrays = load_predictions(args.predictions)
    seq_ids = np.unique(arrays["seq_id"])
    if len(seq_ids) == 0:
        raise ValidationError("predictions file holds no windows")
    seq = int(seq_ids[0]) if args.sequence is None else args.sequence
    sel = np.flatnonzero(arrays["seq_id"] == seq)
    if len(sel) == 0:
        raise ValidationError(f"sequence {seq} not present; available: {seq_ids.tolist()}")
    sel = sel[np.argsort(arrays["frame"][sel])]
    frames = arrays["frame"][sel]
    if np.any(np.diff(frames) != 1):
        raise ValidationError(f"sequence {seq} has gaps; plot needs stride-1 consecutive frames")
    err, mag = accel_series(arrays["pred_joints3d"][sel], arrays["gt_joints3d"][sel])
    rows = [[str(int(f)), repr(float(e)), repr(float(m))] for f, e, m in zip(frames[1:-1], err, mag)]
    write_csv(args.out, ("frame", "pred_accel_err", "gt_accel_magnitude"), rows)
    print(f"wrote {len(rows)} rows for sequence {seq} to {args.out}")
    return EXIT_OK


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="strnet", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True, seed=True):
        if config:
            p.add_argument("--config", help="YAML run configuration (defaults if omitted)")
        if seed:
            p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--out", required=True, help="output path")

    p = sub.add_parser("synth", help="generate a synthetic window dataset")
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("train", help="train (or resume) a model")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--val-dataset", help="validation set for the lr schedule (default: train set)")
    p.add_argument("--checkpoint", help="resume from this checkpoint")
    p.add_argument("--variant", choices=list(VARIANTS))
    p.add_argument("--epochs", type=int, help="override optim.epochs")
    p.add_argument("--log", help="training log CSV (default: <out>.log.csv)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint, write a metrics CSV")
    common(p, config=False, seed=False)
    p.add_argument("--dataset", required=True)
    p.add_argument("--checkpoint")
    p.add_argument("--predictions", help="also save per-window predictions (input for plot)")
    p.add_argument("--oracle-gt", action="store_true",
                   help="debug: bypass the network and score the ground truth")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("ablate", help="train every ablation variant, write a comparison CSV")
    common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--eval-dataset", help="held-out set (default: synthesized with seed + 1000)")
    p.add_argument("--variant", action="append", help="restrict to these variants (repeatable)")
    p.add_argument("--epochs", type=int, help="override optim.epochs")
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("plot", help="per-frame acceleration error series for one sequence")
    common(p, config=False, seed=False)
    p.add_argument("--predictions", required=True, help="file written by eval --predictions")
    p.add_argument("--sequence", type=int, help="sequence id (default: the first one)")
    p.set_defaults(func=cmd_plot)
    return parser


def _thread_limit() -> int | None:
    raw = os.environ.get("STR_THREADS")
    if not raw:
        return None
    try:
        n = int(raw)
    except ValueError:
        raise ValidationError(f"STR_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ValidationError("STR_THREADS must be >= 1")
    return n


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        limit = _thread_limit()
        ctx = threadpool_limits(limits=limit) if limit else contextlib.nullcontext()
        with ctx:
            return args.func(args)
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ContainerError, OSError) as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ConfigError, ValueError, KeyError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
