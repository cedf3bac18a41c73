"""Sweep the obstacle position on the cart-pendulum benchmark.

Runs the selected solvers over a grid of obstacle x-positions, writes the
per-instance records and a performance profile, and prints a success summary.
"""
from __future__ import annotations

import argparse
from pathlib import Path

from fpddp.bench import (
    METRICS,
    RunConfig,
    performance_profile,
    run_sweep,
    write_profile,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", type=Path, default=Path("sweep_out"))
    parser.add_argument("--solver", default="fpddp,dss",
                        help="comma-separated list of solvers")
    parser.add_argument("--sweep-lo", type=float, default=0.7)
    parser.add_argument("--sweep-hi", type=float, default=4.3)
    parser.add_argument("--sweep-n", type=int, default=100)
    parser.add_argument("--workers", type=int, default=0)
    parser.add_argument("--metric", choices=METRICS,
                        default="hessian_evals")
    args = parser.parse_args()

    config = RunConfig(
        problem="cart_pendulum", solver=args.solver,
        sweep_lo=args.sweep_lo, sweep_hi=args.sweep_hi, sweep_n=args.sweep_n,
        workers=args.workers, metric=args.metric, out_dir=args.out,
    )
    records = run_sweep(config)  # writes records.csv and config.txt to out_dir

    profile = performance_profile(records, args.metric)
    write_profile(profile, args.out / f"profile_{args.metric}.csv")

    for solver in profile.solvers:
        solved = sum(1 for r in records
                     if r.solver == solver and r.status == "Feasible")
        total = sum(1 for r in records if r.solver == solver)
        print(f"{solver}: {solved}/{total} instances feasible, "
              f"success fraction {profile.success_fraction(solver):.2f}")
    print(f"wrote {args.out / 'records.csv'} and "
          f"{args.out / f'profile_{args.metric}.csv'}")


if __name__ == "__main__":
    main()
