"""Single-shooting and multiple-shooting baselines on the same feasibility objective.

Both baselines share the DDP solver's linearization, Riccati kernel, Armijo
rule and regularization schedule; they differ only in how a QP solution
becomes a trial iterate.  Single shooting (DSS) scales the optimal control
perturbation and re-simulates, so iterates stay dynamically feasible but no
feedback corrects the states during the step.  Multiple shooting (DMS) scales
the full primal step (states included), accepts on an l1 penalty of the
dynamics gaps, and is only feasible in the limit.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .ocp import (
    OcpModel,
    Trajectory,
    build_feasibility_problem,
    dynamics_defect,
    eval_objective,
    eval_stage_data,
    violation_report,
)
from .riccati import NotPositiveDefiniteError, backward_sweep, linear_rollout, qp_optimal_objective
from .solver import (
    IterateRecord,
    LineSearchFailedError,
    RegState,
    RegularizationOverflowError,
    SolveResult,
    SolveStatus,
    SolverSettings,
    StepOutcome,
    _project_to_feasible,
    backtracking_search,
    control_gradient_from_qp,
    gradient_inf_norm,
    rollout_controls,
    update_regularization,
)

Array = np.ndarray


@dataclass(frozen=True)
class DmsSettings(SolverSettings):
    """Multiple-shooting settings: fixed l1 penalty weight and feasibility tolerance."""

    sigma: float = 0.01
    viol_tol: float = 1e-8

    def __post_init__(self):
        super().__post_init__()
        if self.sigma <= 0.0:
            raise ValueError("sigma must be positive")
        if self.viol_tol <= 0.0:
            raise ValueError("viol_tol must be positive")


def solve_dss(
    model: OcpModel, guess: Trajectory, settings: SolverSettings = SolverSettings()
) -> SolveResult:
    """Direct single shooting on the feasibility objective.

    Per iteration the exact QP step (du0*, du*) is computed once; trials apply
    u = base_u + alpha * du* open-loop through the dynamics.  Termination,
    line search and mu schedule match the DDP solver.
    """
    focp = build_feasibility_problem(model)
    traj, hessian_evals = _project_to_feasible(model, focp, guess, settings)
    f = eval_objective(focp, traj)
    reg = RegState.initial(settings, f)
    history: list[IterateRecord] = []
    iterations = 0
    consecutive_failures = 0
    status: SolveStatus | None = None
    kkt = math.nan
    defect = math.nan

    for k in itertools.count():
        qp0 = eval_stage_data(focp, traj, 0.0)
        hessian_evals += 1
        kkt = gradient_inf_norm(*control_gradient_from_qp(qp0))
        defect = dynamics_defect(model, traj)

        if f <= settings.eps_feas:
            status = SolveStatus.FEASIBLE
        elif kkt <= settings.eps_stat:
            status = SolveStatus.STATIONARY
        elif k >= settings.max_iter:
            status = SolveStatus.MAX_ITER
        if status is not None:
            history.append(IterateRecord(k, f, f, kkt, math.nan, reg.gamma, reg.mu,
                                         math.nan, False, defect))
            break

        m_f = math.nan
        accepted = False
        try:
            bp = backward_sweep(qp0.regularized(reg.gamma))
        except NotPositiveDefiniteError:
            bp = None
        if bp is not None:
            step = linear_rollout(bp, qp0, traj, 1.0)
            m_f = -qp_optimal_objective(bp)
            base = traj
            try:
                alpha, trial, f_trial = backtracking_search(
                    lambda a: rollout_controls(model, base.u0 + a * step.du0, base.u + a * step.du),
                    lambda t: eval_objective(focp, t),
                    f,
                    m_f,
                    settings,
                )
                accepted = True
            except LineSearchFailedError:
                pass

        if not accepted:
            history.append(IterateRecord(k, f, f, kkt, math.nan, reg.gamma, reg.mu,
                                         m_f, False, defect))
            consecutive_failures += 1
            try:
                reg = update_regularization(reg, StepOutcome.FAILURE, f, settings)
            except RegularizationOverflowError:
                status = SolveStatus.REG_FAILURE
                break
            if consecutive_failures > settings.max_reg_restarts:
                status = SolveStatus.REG_FAILURE
                break
            continue

        history.append(IterateRecord(k, f, f, kkt, alpha, reg.gamma, reg.mu,
                                     m_f, True, defect))
        outcome = StepOutcome.FULL_STEP if alpha == 1.0 else StepOutcome.REDUCED_STEP
        traj, f = trial, f_trial
        iterations += 1
        consecutive_failures = 0
        try:
            reg = update_regularization(reg, outcome, f, settings)
        except RegularizationOverflowError:
            status = SolveStatus.REG_FAILURE
            history.append(IterateRecord(k + 1, f, f, math.nan, math.nan, reg.gamma,
                                         reg.mu, math.nan, False,
                                         dynamics_defect(model, traj)))
            break

    return SolveResult(
        trajectory=traj,
        status=status,
        iterations=iterations,
        history=history,
        f=f,
        kkt=kkt,
        defect=defect,
        hessian_evals=hessian_evals,
    )


def _defect_l1(model: OcpModel, traj: Trajectory) -> float:
    """l1 norm of all dynamics gaps, the u0 = x_1 split included."""
    total = float(np.sum(np.abs(traj.x[0] - traj.u0)))
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, model.N + 1):
            try:
                gap = traj.x[i] - model.dynamics(i, traj.x[i - 1], traj.u[i - 1])
            except (OverflowError, FloatingPointError, ValueError):
                return math.inf
            if not np.all(np.isfinite(gap)):
                return math.inf
            total += float(np.sum(np.abs(gap)))
    return total


def solve_dms(
    model: OcpModel, guess: Trajectory, settings: DmsSettings = DmsSettings()
) -> SolveResult:
    """Direct multiple shooting with a fixed-weight l1 merit function.

    States and controls are both decision variables, so the guess need not be
    dynamically feasible and iterates generally are not.  Steps scale the
    exact QP solution; acceptance tests the merit phi = f + sigma * |gaps|_1
    against its predicted reduction m_f + sigma * |gaps|_1.  Terminates once
    the original-problem violation drops below viol_tol and the adjoint
    stationarity residual below eps_stat.

    The auxiliary initial control is an artifact of the reformulation, so it
    is synchronized to the guess's first state on entry (the QP keeps the two
    locked together afterwards); disagreement belongs in the state guess.
    """
    focp = build_feasibility_problem(model)
    traj = guess.copy()
    traj.u0 = traj.x[0].copy()
    f = eval_objective(focp, traj)
    reg = RegState.initial(settings, f)
    history: list[IterateRecord] = []
    iterations = 0
    hessian_evals = 0
    consecutive_failures = 0
    status: SolveStatus | None = None
    kkt = math.nan
    defect = math.nan

    for k in itertools.count():
        qp0 = eval_stage_data(focp, traj, 0.0)
        hessian_evals += 1
        grad_inf = gradient_inf_norm(*control_gradient_from_qp(qp0))
        defect = dynamics_defect(model, traj)
        kkt = max(grad_inf, defect)
        gaps_l1 = _defect_l1(model, traj)
        merit = f + settings.sigma * gaps_l1

        if violation_report(model, traj).total <= settings.viol_tol and grad_inf <= settings.eps_stat:
            status = SolveStatus.FEASIBLE
        elif k >= settings.max_iter:
            status = SolveStatus.MAX_ITER
        if status is not None:
            history.append(IterateRecord(k, f, merit, kkt, math.nan, reg.gamma, reg.mu,
                                         math.nan, False, defect))
            break

        m_phi = math.nan
        accepted = False
        try:
            bp = backward_sweep(qp0.regularized(reg.gamma))
        except NotPositiveDefiniteError:
            bp = None
        if bp is not None:
            step = linear_rollout(bp, qp0, traj, 1.0)
            m_phi = -qp_optimal_objective(bp) + settings.sigma * gaps_l1
            base = traj
            try:
                alpha, trial, _ = backtracking_search(
                    lambda a: Trajectory(base.u0 + a * step.du0, base.u + a * step.du,
                                         base.x + a * step.dx),
                    lambda t: eval_objective(focp, t) + settings.sigma * _defect_l1(model, t),
                    merit,
                    m_phi,
                    settings,
                )
                accepted = True
            except LineSearchFailedError:
                pass

        if not accepted:
            history.append(IterateRecord(k, f, merit, kkt, math.nan, reg.gamma, reg.mu,
                                         m_phi, False, defect))
            consecutive_failures += 1
            try:
                reg = update_regularization(reg, StepOutcome.FAILURE, f, settings)
            except RegularizationOverflowError:
                status = SolveStatus.REG_FAILURE
                break
            if consecutive_failures > settings.max_reg_restarts:
                status = SolveStatus.REG_FAILURE
                break
            continue

        history.append(IterateRecord(k, f, merit, kkt, alpha, reg.gamma, reg.mu,
                                     m_phi, True, defect))
        outcome = StepOutcome.FULL_STEP if alpha == 1.0 else StepOutcome.REDUCED_STEP
        traj = trial
        f = eval_objective(focp, traj)
        iterations += 1
        consecutive_failures = 0
        try:
            reg = update_regularization(reg, outcome, f, settings)
        except RegularizationOverflowError:
            status = SolveStatus.REG_FAILURE
            history.append(IterateRecord(k + 1, f, f, math.nan, math.nan, reg.gamma,
                                         reg.mu, math.nan, False,
                                         dynamics_defect(model, traj)))
            break

    return SolveResult(
        trajectory=traj,
        status=status,
        iterations=iterations,
        history=history,
        f=f,
        kkt=kkt,
        defect=defect,
        hessian_evals=hessian_evals,
    )
