"""Benchmark harness: single runs, obstacle sweeps, performance profiles.

Run outcomes are recorded independently of what a solver claims: the final
trajectory is re-evaluated from scratch, and only f <= 1e-8 together with a
re-simulated dynamics defect <= 1e-12 earns the status "Feasible".  Records
and run configurations round-trip through CSV and INI-style text files.
"""
from __future__ import annotations

import configparser
import csv
import math
import os
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .baselines import DmsSettings, solve_dms, solve_dss
from .models import default_guess, make_model
from .ocp import build_feasibility_problem, dynamics_defect, eval_objective
from .solver import (
    SolveResult,
    SolverSettings,
    control_gradient,
    gradient_inf_norm,
    solve,
)

SOLVERS = ("fpddp", "dss", "dms")
METRICS = ("walltime", "hessian_evals")

# Success rule applied to the re-evaluated final iterate.
SUCCESS_F_TOL = 1e-8
SUCCESS_DEFECT_TOL = 1e-12


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run or a sweep."""

    problem: str = "chen_allgoewer"
    solver: str = "fpddp"          # sweep accepts a comma-separated list
    sigma: float = 0.01
    max_iter: int = 200
    obstacle_x: float = 2.5
    seed: int = 0
    sweep_lo: float = 0.7
    sweep_hi: float = 4.3
    sweep_n: int = 100
    workers: int = 0               # 0 = one per CPU
    metric: str = "hessian_evals"
    out_dir: str | None = None


@dataclass(frozen=True)
class RunRecord:
    """One solver run on one problem instance, with re-verified finals."""

    problem: str
    solver: str
    sigma: float
    obstacle_x: float
    seed: int
    status: str
    iterations: int
    hessian_evals: int
    wall_time: float
    final_f: float
    final_kkt: float
    final_defect: float


RECORD_FIELDS = [f for f in RunRecord.__dataclass_fields__]


class ConfigError(ValueError):
    """A run configuration is malformed or inconsistent."""


def _check_config(config: RunConfig, solvers: list[str]) -> None:
    for solver in solvers:
        if solver not in SOLVERS:
            raise ConfigError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    if config.metric not in METRICS:
        raise ConfigError(f"unknown metric {config.metric!r}; choose from {METRICS}")
    if config.sweep_n < 1:
        raise ConfigError("sweep_n must be at least 1")


def derive_status(solver_status: str, final_f: float, final_defect: float) -> str:
    """Map a solver's claim plus re-checked finals to the recorded status."""
    if final_f <= SUCCESS_F_TOL and final_defect <= SUCCESS_DEFECT_TOL:
        return "Feasible"
    if solver_status == "Feasible":
        return "Converged"  # solver's own rule passed, the strict re-check did not
    return solver_status


def execute_run(config: RunConfig) -> tuple[RunRecord, SolveResult]:
    """Run one solver on one instance; re-verify the final iterate."""
    if config.problem == "cart_pendulum":
        model = make_model(config.problem, obstacle_x=config.obstacle_x)
        obstacle_x = config.obstacle_x
    else:
        model = make_model(config.problem)
        obstacle_x = math.nan
    guess = default_guess(model)
    sigma = math.nan
    t0 = time.perf_counter()
    if config.solver == "fpddp":
        result = solve(model, guess, SolverSettings(max_iter=config.max_iter))
    elif config.solver == "dss":
        result = solve_dss(model, guess, SolverSettings(max_iter=config.max_iter))
    elif config.solver == "dms":
        sigma = config.sigma
        result = solve_dms(model, guess, DmsSettings(sigma=config.sigma, max_iter=config.max_iter))
    else:
        raise ConfigError(f"unknown solver {config.solver!r}; choose from {SOLVERS}")
    wall = time.perf_counter() - t0

    focp = build_feasibility_problem(model)
    final_f = eval_objective(focp, result.trajectory)
    final_defect = dynamics_defect(model, result.trajectory)
    final_kkt = gradient_inf_norm(*control_gradient(model, focp, result.trajectory))
    record = RunRecord(
        problem=config.problem,
        solver=config.solver,
        sigma=sigma,
        obstacle_x=obstacle_x,
        seed=config.seed,
        status=derive_status(result.status.value, final_f, final_defect),
        iterations=result.iterations,
        hessian_evals=result.hessian_evals,
        wall_time=wall,
        final_f=final_f,
        final_kkt=final_kkt,
        final_defect=final_defect,
    )
    return record, result


def run_single(config: RunConfig) -> RunRecord:
    """Run one instance; write config, record and iterate log when out_dir is set."""
    _check_config(config, [config.solver])
    record, result = execute_run(config)
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_config(config, out / "config.txt")
        write_records([record], out / "records.csv")
        write_iterate_log(result, out / "iterates.csv")
    return record


def _run_job(config: RunConfig) -> RunRecord:
    """execute_run wrapped so one bad instance never kills a sweep."""
    t0 = time.perf_counter()
    try:
        record, _ = execute_run(config)
        return record
    except Exception:
        return RunRecord(
            problem=config.problem,
            solver=config.solver,
            sigma=config.sigma if config.solver == "dms" else math.nan,
            obstacle_x=config.obstacle_x if config.problem == "cart_pendulum" else math.nan,
            seed=config.seed,
            status="Error",
            iterations=0,
            hessian_evals=0,
            wall_time=time.perf_counter() - t0,
            final_f=math.nan,
            final_kkt=math.nan,
            final_defect=math.nan,
        )


def run_sweep(config: RunConfig) -> list[RunRecord]:
    """Solve sweep_n instances with obstacle centers on [sweep_lo, sweep_hi].

    config.solver may name several solvers separated by commas; every named
    solver runs on every instance.  Failures of individual instances are
    recorded (status "Error"), never raised.  Records come back ordered by
    (solver, obstacle position).
    """
    solvers = [s.strip() for s in config.solver.split(",")]
    _check_config(config, solvers)
    values = np.linspace(config.sweep_lo, config.sweep_hi, config.sweep_n)
    jobs = [
        replace(config, solver=solver, obstacle_x=float(v), out_dir=None)
        for solver in solvers
        for v in values
    ]
    workers = config.workers if config.workers > 0 else (os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_job, jobs, chunksize=4))
    else:
        records = [_run_job(job) for job in jobs]
    if config.out_dir is not None:
        out = Path(config.out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_config(config, out / "config.txt")
        write_records(records, out / "records.csv")
    return records


# ====== Performance profiles ======


@dataclass
class ProfileResult:
    """Dolan-More profile curves rho_s(tau) over a shared ratio grid."""

    metric: str
    solvers: list[str]
    tau: np.ndarray
    rho: dict[str, np.ndarray]
    n_instances: int

    def success_fraction(self, solver: str) -> float:
        return float(self.rho[solver][-1]) if self.tau.size else 0.0


def _metric_value(record: RunRecord, metric: str) -> float:
    if metric == "walltime":
        return record.wall_time
    if metric == "hessian_evals":
        return float(record.hessian_evals)
    raise ValueError(f"unknown metric {metric!r}; choose from {METRICS}")


def performance_profile(records: list[RunRecord], metric: str) -> ProfileResult:
    """Compute rho_s(tau) = fraction of instances solved within tau * best.

    An instance is one (problem, obstacle_x, seed) triple; only records with
    status "Feasible" count as solved.  Instances where no solver succeeded
    cannot be scored and are dropped with a warning.  Curves are evaluated on
    the grid of all finite ratios, so rho at the last grid point equals each
    solver's success fraction over the scored instances.
    """
    if not records:
        raise ValueError("no records to profile")
    solvers = list(dict.fromkeys(r.solver for r in records))
    instances: dict[tuple, dict[str, RunRecord]] = {}
    for r in records:
        key = (r.problem, repr(r.obstacle_x), r.seed)
        instances.setdefault(key, {})[r.solver] = r

    ratios: dict[str, list[float]] = {s: [] for s in solvers}
    scored = 0
    for key, by_solver in instances.items():
        values = {
            s: _metric_value(r, metric)
            for s, r in by_solver.items()
            if r.status == "Feasible"
        }
        if not values:
            warnings.warn(f"instance {key}: no solver succeeded; excluded from profile")
            continue
        best = min(values.values())
        scored += 1
        for s in solvers:
            ratios[s].append(values[s] / best if s in values else math.inf)
    if scored == 0:
        raise ValueError("every instance failed for every solver; nothing to profile")

    finite = sorted({r for rs in ratios.values() for r in rs if math.isfinite(r)} | {1.0})
    tau = np.array(finite)
    rho = {
        s: np.array([sum(1 for r in ratios[s] if r <= t) / scored for t in tau])
        for s in solvers
    }
    return ProfileResult(metric=metric, solvers=solvers, tau=tau, rho=rho, n_instances=scored)


# ====== File formats ======


def write_records(records: list[RunRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=RECORD_FIELDS)
        writer.writeheader()
        for r in records:
            writer.writerow({f: getattr(r, f) for f in RECORD_FIELDS})


def read_records(path: str | Path) -> list[RunRecord]:
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            records.append(RunRecord(
                problem=row["problem"],
                solver=row["solver"],
                sigma=float(row["sigma"]),
                obstacle_x=float(row["obstacle_x"]),
                seed=int(row["seed"]),
                status=row["status"],
                iterations=int(row["iterations"]),
                hessian_evals=int(row["hessian_evals"]),
                wall_time=float(row["wall_time"]),
                final_f=float(row["final_f"]),
                final_kkt=float(row["final_kkt"]),
                final_defect=float(row["final_defect"]),
            ))
    return records


def write_iterate_log(result: SolveResult, path: str | Path) -> None:
    """Per-iteration CSV: k, f, kkt, alpha, gamma first, diagnostics after."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["k", "f", "kkt", "alpha", "gamma", "mu", "m_f", "accepted", "defect", "merit"])
        for rec in result.history:
            writer.writerow([rec.k, rec.f, rec.kkt, rec.alpha, rec.gamma, rec.mu,
                             rec.m_f, int(rec.accepted), rec.defect, rec.merit])


def write_profile(profile: ProfileResult, path: str | Path) -> None:
    """Profile curves as plottable columns: tau, then one rho column per solver."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["tau"] + profile.solvers)
        for j, t in enumerate(profile.tau):
            writer.writerow([t] + [profile.rho[s][j] for s in profile.solvers])


def write_config(config: RunConfig, path: str | Path) -> None:
    parser = configparser.ConfigParser()
    parser["problem"] = {"name": config.problem, "obstacle_x": repr(config.obstacle_x)}
    parser["solver"] = {
        "name": config.solver,
        "sigma": repr(config.sigma),
        "max_iter": str(config.max_iter),
        "seed": str(config.seed),
    }
    parser["sweep"] = {
        "lo": repr(config.sweep_lo),
        "hi": repr(config.sweep_hi),
        "n": str(config.sweep_n),
        "workers": str(config.workers),
        "metric": config.metric,
    }
    if config.out_dir is not None:
        parser["output"] = {"dir": config.out_dir}
    with open(path, "w") as fh:
        parser.write(fh)


def read_config(path: str | Path) -> RunConfig:
    parser = configparser.ConfigParser()
    if not parser.read(path):
        raise ConfigError(f"cannot read config file {path}")
    try:
        return RunConfig(
            problem=parser["problem"]["name"],
            solver=parser["solver"]["name"],
            sigma=float(parser["solver"]["sigma"]),
            max_iter=int(parser["solver"]["max_iter"]),
            obstacle_x=float(parser["problem"]["obstacle_x"]),
            seed=int(parser["solver"]["seed"]),
            sweep_lo=float(parser["sweep"]["lo"]),
            sweep_hi=float(parser["sweep"]["hi"]),
            sweep_n=int(parser["sweep"]["n"]),
            workers=int(parser["sweep"]["workers"]),
            metric=parser["sweep"]["metric"],
            out_dir=parser.get("output", "dir", fallback=None),
        )
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from None
