"""Compare all four solvers on the fixed-time point-to-point benchmark.

Runs FP-DDP, single shooting, and multiple shooting (two penalty weights)
from the same LQR-based initial guess and prints a summary table.
"""
from __future__ import annotations

import argparse
import time

from fpddp import (
    DmsSettings,
    SolverSettings,
    chen_allgoewer_model,
    default_guess,
    solve,
    solve_dms,
    solve_dss,
)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--max-iter", type=int, default=200)
    args = parser.parse_args()

    model = chen_allgoewer_model()
    guess = default_guess(model)
    settings = SolverSettings(max_iter=args.max_iter)

    runs = [
        ("fpddp", lambda: solve(model, guess, settings)),
        ("dss", lambda: solve_dss(model, guess, settings)),
        ("dms (sigma=0.01)", lambda: solve_dms(
            model, guess, DmsSettings(sigma=0.01, max_iter=args.max_iter))),
        ("dms (sigma=1.0)", lambda: solve_dms(
            model, guess, DmsSettings(sigma=1.0, max_iter=args.max_iter))),
    ]

    header = f"{'solver':<18}{'status':<12}{'iters':>6}{'hess':>6}" \
             f"{'final F':>12}{'defect':>10}{'wall [s]':>10}"
    print(header)
    print("-" * len(header))
    for name, run in runs:
        t0 = time.perf_counter()
        result = run()
        wall = time.perf_counter() - t0
        print(f"{name:<18}{result.status.value:<12}{result.iterations:>6}"
              f"{result.hessian_evals:>6}{result.f:>12.3e}"
              f"{result.defect:>10.1e}{wall:>10.3f}")
    print("note: wall times are single-run measurements")


if __name__ == "__main__":
    main()
