"""Command-line entry points for training, benchmarks, tuning and stats.

Exit codes: 0 success, 1 run divergence (or failed check), 2 config
error, 3 I/O error.
"""

from __future__ import annotations

import argparse
import glob as globlib
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .. import autodiff, models
from ..autodiff import LossKind
from ..data import Batch, DataFormatError
from . import config as config_mod
from .config import ConfigError
from .diagnostics import fisher_alignment
from .records import emit, read_records
from .rosenbrock import PRESET_NAMES, preset_optimizer, run_rosenbrock, write_trajectory
from .search import SearchObjective, random_search, search_space_for
from .stats import align_time_series, bootstrap_trend
from .training import RunStatus, run_training

EXIT_OK = 0
EXIT_DIVERGED = 1
EXIT_CONFIG = 2
EXIT_IO = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adamqlr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run one training job from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)

    p = sub.add_parser("rosenbrock", help="optimize the banana-valley benchmark")
    p.add_argument("--optimizer", choices=PRESET_NAMES, required=True)
    p.add_argument("--steps", type=int, default=200)
    p.add_argument("--start", default="1,-1", help="comma-separated x,y")
    p.add_argument("--out", default=None)
    p.add_argument("--lr", type=float, default=None)
    p.add_argument("--momentum", type=float, default=None)
    p.add_argument("--weight-decay", type=float, default=None)

    p = sub.add_parser("tune", help="random-search hyperparameters around a config")
    p.add_argument("--config", required=True)
    p.add_argument("--budget", type=int, default=200)
    p.add_argument("--objective", choices=["val", "train"], default="val")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--halving", action="store_true", help="successive-halving rungs")
    p.add_argument("--out", default=None)

    p = sub.add_parser("bootstrap", help="bootstrapped median trend over run files")
    p.add_argument("--inputs", required=True, help="glob of metric record files")
    p.add_argument("--n-boot", type=int, default=50)
    p.add_argument("--align", choices=["step", "time"], default="step")
    p.add_argument("--metric", default="train_loss")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-points", type=int, default=100)
    p.add_argument("--out", default=None)

    p = sub.add_parser("gradcheck", help="finite-difference gradient/curvature check")
    p.add_argument(
        "--model",
        choices=["mlp-regression", "mlp-classification", "rosenbrock"],
        default="mlp-regression",
    )
    p.add_argument("--seed", type=int, default=0)

    p = sub.add_parser("diag-fisher", help="Adam second-moment vs empirical Fisher diagonal")
    p.add_argument("--config", required=True)
    p.add_argument("--steps", type=int, default=100)
    p.add_argument("--out", default=None)

    return parser


def _cmd_train(args) -> int:
    cfg = config_mod.from_json(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    out_path = args.out or cfg.output_path
    result = run_training(cfg)
    if out_path is not None:
        fmt = "csv" if str(out_path).endswith(".csv") else "jsonl"
        emit(result.records, out_path, fmt)
        if result.standardize_stats is not None:
            with open(str(out_path) + ".norm.json", "w") as fh:
                json.dump(result.standardize_stats.to_dict(), fh)
    last = result.records[-1] if result.records else None
    print(
        f"status={result.status.value} steps={len(result.records)} "
        f"final_train_loss={last.train_loss if last else 'n/a'}"
    )
    return EXIT_DIVERGED if result.status is RunStatus.DIVERGED else EXIT_OK


def _cmd_rosenbrock(args) -> int:
    try:
        x, y = (float(s) for s in args.start.split(","))
    except ValueError:
        raise ConfigError(f"--start expects 'x,y', got {args.start!r}") from None
    opt = preset_optimizer(args.optimizer, args.lr, args.momentum, args.weight_decay)
    result = run_rosenbrock(opt, steps=args.steps, start=(x, y))
    if args.out:
        write_trajectory(result, args.out)
    print(
        f"status={result.status.value} steps={len(result.points) - 1} "
        f"final_f={result.final_f!r} final_xy=({result.points[-1][1]!r},{result.points[-1][2]!r})"
    )
    return EXIT_DIVERGED if result.status is RunStatus.DIVERGED else EXIT_OK


def _cmd_tune(args) -> int:
    cfg = config_mod.from_json(args.config)
    seed = cfg.seed if args.seed is None else args.seed
    space = search_space_for(
        cfg.optimizer.kind, include_batch_size=cfg.dataset is not None
    )
    objective = (
        SearchObjective.FINAL_VAL_LOSS
        if args.objective == "val"
        else SearchObjective.FINAL_TRAIN_LOSS
    )
    best, trials = random_search(space, args.budget, objective, cfg, seed, args.halving)
    if args.out:
        payload = {
            "best": {"config": best.config, "score": best.score, "status": best.status.value},
            "trials": [
                {
                    "config": t.config,
                    "score": t.score,
                    "status": t.status.value,
                    "failure_step": t.failure_step,
                    "rung_epochs": t.rung_epochs,
                }
                for t in trials
            ],
        }
        with open(args.out, "w") as fh:
            json.dump(payload, fh, indent=2)
    print(f"best score={best.score!r} optimizer={best.config['optimizer']}")
    return EXIT_OK


def _metric_series(records, metric: str, with_time: bool):
    pairs = [
        (rec.wall_time_s, getattr(rec, "lam" if metric == "lambda" else metric))
        for rec in records
    ]
    pairs = [(t, v) for t, v in pairs if v is not None]
    if not pairs:
        raise ConfigError(f"no values for metric {metric!r} in input records")
    times = np.array([t for t, _ in pairs])
    values = np.array([v for _, v in pairs])
    return (times, values) if with_time else values


def _cmd_bootstrap(args) -> int:
    paths = sorted(globlib.glob(args.inputs))
    if not paths:
        raise ConfigError(f"no files match {args.inputs!r}")
    runs = [read_records(p) for p in paths]
    if args.align == "time":
        series = [_metric_series(r, args.metric, with_time=True) for r in runs]
        grid, aligned = align_time_series(series, args.n_points)
        mean, std = bootstrap_trend(aligned, args.n_boot, args.seed)
        index_name, index = "time_s", grid
    else:
        aligned = [_metric_series(r, args.metric, with_time=False) for r in runs]
        mean, std = bootstrap_trend(aligned, args.n_boot, args.seed)
        index_name, index = "index", np.arange(len(mean))
    lines = [f"{index_name},mean,std"]
    lines += [
        f"{int(i) if args.align == 'step' else float(i)!r},{float(m)!r},{float(s)!r}"
        for i, m, s in zip(index, mean, std)
    ]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _gradcheck_model(name: str, seed: int):
    rng = np.random.default_rng(seed)
    if name == "rosenbrock":
        obj = models.rosenbrock_objective()
        params = obj.init_vector(rng.normal(size=2))
        return obj, params, None
    if name == "mlp-regression":
        spec = models.MlpSpec((8, 50, 1), LossKind.MSE)
        batch = Batch(rng.normal(size=(4, 8)), rng.normal(size=(4, 1)))
    else:
        spec = models.MlpSpec((16, 50, 10), LossKind.SOFTMAX_CROSS_ENTROPY)
        batch = Batch(rng.normal(size=(4, 16)), rng.integers(0, 10, size=4))
    obj = models.mlp_objective(spec)
    return obj, models.mlp_init(spec, seed), batch


def _cmd_gradcheck(args) -> int:
    obj, params, batch = _gradcheck_model(args.model, args.seed)
    rng = np.random.default_rng(args.seed + 1)

    _, grad = autodiff.eval_grad(obj, params, batch)
    fd = autodiff.fd_grad(obj, params, batch, 1e-5)
    scale = max(float(np.max(np.abs(fd.values))), 1e-12)
    grad_err = float(np.max(np.abs(grad.values - fd.values))) / scale

    v = params.with_values(rng.normal(size=len(params)))
    h = 1e-5
    _, gp = autodiff.eval_grad(obj, params.with_values(params.values + h * v.values), batch)
    _, gm = autodiff.eval_grad(obj, params.with_values(params.values - h * v.values), batch)
    fd_hv = (gp.values - gm.values) / (2 * h)
    hv = autodiff.hvp(obj, params, batch, v).values
    hvp_err = float(np.max(np.abs(hv - fd_hv))) / max(float(np.max(np.abs(fd_hv))), 1e-12)

    ok = grad_err <= 1e-5 and hvp_err <= 1e-4
    print(f"model={args.model} grad_rel_err={grad_err:.3e} hvp_rel_err={hvp_err:.3e} "
          f"{'OK' if ok else 'FAIL'}")
    return EXIT_OK if ok else EXIT_DIVERGED


def _cmd_diag_fisher(args) -> int:
    cfg = config_mod.from_json(args.config)
    report = fisher_alignment(cfg, steps=args.steps)
    text = json.dumps(report, indent=2)
    if args.out:
        Path(args.out).write_text(text + "\n")
    print(text)
    return EXIT_OK


_COMMANDS = {
    "train": _cmd_train,
    "rosenbrock": _cmd_rosenbrock,
    "tune": _cmd_tune,
    "bootstrap": _cmd_bootstrap,
    "gradcheck": _cmd_gradcheck,
    "diag-fisher": _cmd_diag_fisher,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, DataFormatError, ValueError) as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
