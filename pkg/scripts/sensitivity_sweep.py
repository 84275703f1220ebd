"""Run one sensitivity sweep grid (learning-rate rescale, clipping,
initial damping, batch size, or symmetric damping factors) around a base
config and report final losses per grid point.

Usage: python scripts/sensitivity_sweep.py --config cfg.json --sweep lambda0 [--out sweep.csv]
"""

import argparse
import sys

from adamqlr.bench import config as config_mod
from adamqlr.bench.sweeps import enumerate_sweep, standard_sweeps
from adamqlr.bench.training import run_training


def main():
    sweeps = standard_sweeps()
    parser = argparse.ArgumentParser()
    parser.add_argument("--config", required=True)
    parser.add_argument("--sweep", choices=sorted(sweeps), required=True)
    parser.add_argument("--out", default=None)
    args = parser.parse_args()

    base = config_mod.from_json(args.config)
    sweep = sweeps[args.sweep]
    lines = [f"{args.sweep},status,final_train_loss,final_val_loss"]
    for value, cfg in zip(sweep.values, enumerate_sweep(base, sweep)):
        result = run_training(cfg)
        final = result.records[-1] if result.records else None
        val = next(
            (r.val_loss for r in reversed(result.records) if r.val_loss is not None),
            None,
        )
        lines.append(
            f"{float(value)!r},{result.status.value},"
            f"{final.train_loss if final else ''},{'' if val is None else val}"
        )
        print(lines[-1])
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
