"""Command-line benchmark driver: solve single instances, sweep, profile."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .bench import (
    METRICS,
    SOLVERS,
    ConfigError,
    RunConfig,
    performance_profile,
    read_records,
    run_single,
    run_sweep,
    write_profile,
)
from .models import MODEL_BUILDERS

TIMING_NOTE = "note: wall times are single-run measurements"


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpddp",
        description="Benchmark driver for the feasibility-projection DDP solver and baselines.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    solve_p = sub.add_parser("solve", help="run one solver on one problem instance")
    sweep_p = sub.add_parser("sweep", help="run solvers across a range of obstacle positions")
    for p in (solve_p, sweep_p):
        p.add_argument("--problem", choices=sorted(MODEL_BUILDERS), default="chen_allgoewer")
        p.add_argument("--sigma", type=float, default=0.01,
                       help="l1 penalty weight (dms only)")
        p.add_argument("--max-iter", type=int, default=200)
        p.add_argument("--out", type=Path, default=None, metavar="DIR",
                       help="directory for config/records/log files")
    solve_p.add_argument("--solver", choices=SOLVERS, default="fpddp")
    solve_p.add_argument("--obstacle-x", type=float, default=2.5,
                         help="obstacle center abscissa (cart_pendulum only)")
    sweep_p.add_argument("--solver", default="fpddp",
                         help="solver name or comma-separated list from {fpddp,dss,dms}")
    sweep_p.add_argument("--sweep-lo", type=float, default=0.7)
    sweep_p.add_argument("--sweep-hi", type=float, default=4.3)
    sweep_p.add_argument("--sweep-n", type=int, default=100)
    sweep_p.add_argument("--workers", type=int, default=0,
                         help="process count for the sweep (0 = one per CPU)")

    profile_p = sub.add_parser("profile", help="performance profile from sweep records")
    profile_p.add_argument("--out", type=Path, required=True, metavar="DIR",
                           help="directory holding records.csv; the profile CSV lands there too")
    profile_p.add_argument("--metric", choices=METRICS, default="hessian_evals")
    return parser


def _cmd_solve(args: argparse.Namespace) -> int:
    config = RunConfig(
        problem=args.problem,
        solver=args.solver,
        sigma=args.sigma,
        max_iter=args.max_iter,
        obstacle_x=args.obstacle_x,
        out_dir=str(args.out) if args.out else None,
    )
    record = run_single(config)
    print(f"{record.problem} / {record.solver}: status={record.status} "
          f"iterations={record.iterations} hessian_evals={record.hessian_evals} "
          f"f={record.final_f:.3e} kkt={record.final_kkt:.3e} defect={record.final_defect:.3e} "
          f"wall={record.wall_time:.3f}s")
    print(TIMING_NOTE)
    return 0 if record.status == "Feasible" else 1


def _cmd_sweep(args: argparse.Namespace) -> int:
    config = RunConfig(
        problem=args.problem,
        solver=args.solver,
        sigma=args.sigma,
        max_iter=args.max_iter,
        sweep_lo=args.sweep_lo,
        sweep_hi=args.sweep_hi,
        sweep_n=args.sweep_n,
        workers=args.workers,
        out_dir=str(args.out) if args.out else None,
    )
    records = run_sweep(config)
    solved = sum(1 for r in records if r.status == "Feasible")
    by_solver = {}
    for r in records:
        by_solver.setdefault(r.solver, []).append(r)
    for solver, recs in by_solver.items():
        ok = sum(1 for r in recs if r.status == "Feasible")
        print(f"{args.problem} / {solver}: {ok}/{len(recs)} feasible")
    print(TIMING_NOTE)
    return 0 if solved == len(records) else 1


def _cmd_profile(args: argparse.Namespace) -> int:
    records_path = args.out / "records.csv"
    if not records_path.exists():
        print(f"error: no records at {records_path}", file=sys.stderr)
        return 2
    records = read_records(records_path)
    profile = performance_profile(records, args.metric)
    out_path = args.out / f"profile_{args.metric}.csv"
    write_profile(profile, out_path)
    for solver in profile.solvers:
        print(f"{solver}: success fraction {profile.success_fraction(solver):.2f} "
              f"over {profile.n_instances} instances")
    print(f"profile written to {out_path}")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "solve":
            return _cmd_solve(args)
        if args.command == "sweep":
            return _cmd_sweep(args)
        return _cmd_profile(args)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
