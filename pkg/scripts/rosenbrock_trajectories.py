"""Run every optimizer preset on the banana-valley benchmark and dump
trajectory CSVs for plotting.

Usage: python scripts/rosenbrock_trajectories.py [--steps 200] [--out-dir runs/rosenbrock]
"""

import argparse
from pathlib import Path

from adamqlr.bench.rosenbrock import (
    PRESET_NAMES,
    preset_optimizer,
    run_rosenbrock,
    write_trajectory,
)


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=200)
    parser.add_argument("--start", default="1,-1")
    parser.add_argument("--out-dir", default="runs/rosenbrock")
    args = parser.parse_args()

    x, y = (float(s) for s in args.start.split(","))
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    for name in PRESET_NAMES:
        result = run_rosenbrock(preset_optimizer(name), steps=args.steps, start=(x, y))
        path = out_dir / f"{name}.csv"
        write_trajectory(result, path)
        print(
            f"{name:16s} status={result.status.value:9s} "
            f"final_f={result.final_f:.6g} -> {path}"
        )


if __name__ == "__main__":
    main()
