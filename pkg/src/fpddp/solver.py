"""Feasibility-projection DDP: globally convergent least-squares trajectory search.

The solver drives the feasibility objective f to zero over dynamically
feasible iterates.  Each iteration linearizes the problem, regularizes the
Gauss-Newton Hessian blocks with gamma = mu * f (so regularization vanishes
as feasibility is approached), solves the stagewise QP by a Riccati sweep,
and rolls the gains forward through the exact dynamics, so every trial
iterate satisfies the dynamics by construction.  An Armijo backtracking
search on f accepts steps; mu follows a Levenberg-Marquardt style schedule
that shrinks after full steps and grows after reduced or failed ones.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np

from .ocp import (
    EvaluationError,
    FeasibilityOcp,
    OcpModel,
    QpData,
    Trajectory,
    build_feasibility_problem,
    dynamics_defect,
    eval_objective,
    eval_stage_data,
)
from .riccati import (
    BackwardPass,
    NotPositiveDefiniteError,
    backward_sweep,
    linear_rollout,
    qp_optimal_objective,
)

Array = np.ndarray

# Iterates with dynamics defect at or below this count as dynamically feasible.
FEASIBLE_DEFECT_TOL = 1e-12


class RolloutDivergedError(RuntimeError):
    """A forward rollout produced a non-finite state; carries the stage index."""

    def __init__(self, stage: int):
        super().__init__(f"rollout diverged at stage {stage}")
        self.stage = stage


class LineSearchFailedError(RuntimeError):
    """Backtracking reached alpha_min without an acceptable trial."""


class RegularizationOverflowError(RuntimeError):
    """The regularization scale mu exceeded its overflow bound."""


class SolveStatus(Enum):
    FEASIBLE = "Feasible"
    STATIONARY = "Stationary"
    MAX_ITER = "MaxIter"
    REG_FAILURE = "RegFailure"


@dataclass(frozen=True)
class SolverSettings:
    """Tolerances and schedule constants shared by all solvers here.

    eps_feas/eps_stat are the termination thresholds on f and on the max-norm
    control gradient; mu0/mu_min/mu_max/lam parameterize the regularization
    schedule gamma = mu * f; eta is the Armijo slope fraction.
    """

    eta: float = 1e-6
    alpha_min: float = 1e-17
    eps_feas: float = 1e-12
    eps_stat: float = 1e-8
    mu0: float = 1e-3
    mu_min: float = 1e-16
    mu_max: float = 1e20
    lam: float = 5.0
    max_iter: int = 200
    max_reg_restarts: int = 30

    def __post_init__(self):
        if not (0.0 < self.eta <= 0.5):
            raise ValueError("eta must lie in (0, 1/2]")
        if self.lam <= 1.0:
            raise ValueError("lam must exceed 1")
        for name in ("alpha_min", "eps_feas", "eps_stat", "mu0", "mu_min", "mu_max"):
            if getattr(self, name) <= 0.0:
                raise ValueError(f"{name} must be positive")
        if self.max_iter < 0 or self.max_reg_restarts < 0:
            raise ValueError("iteration limits must be nonnegative")


class StepOutcome(Enum):
    FULL_STEP = "full"
    REDUCED_STEP = "reduced"
    FAILURE = "failure"


@dataclass(frozen=True)
class RegState:
    """Current regularization scale mu, its one-step memory, and gamma = mu * f."""

    mu: float
    mu_bar: float
    gamma: float

    @staticmethod
    def initial(settings: SolverSettings, f: float) -> "RegState":
        return RegState(mu=settings.mu0, mu_bar=settings.mu0, gamma=settings.mu0 * f)


def update_regularization(
    reg: RegState, outcome: StepOutcome, f_new: float, settings: SolverSettings
) -> RegState:
    """Advance the mu schedule after a step attempt.

    Full steps shrink mu to max(mu_min, mu_bar / lam) and refresh the memory
    mu_bar with the pre-update mu; reduced and failed steps multiply mu by lam
    and leave mu_bar untouched.  The returned gamma is mu * f_new.  Raises
    RegularizationOverflowError once mu exceeds mu_max.
    """
    if outcome is StepOutcome.FULL_STEP:
        mu = max(settings.mu_min, reg.mu_bar / settings.lam)
        mu_bar = reg.mu
    else:
        mu = settings.lam * reg.mu
        mu_bar = reg.mu_bar
    if mu > settings.mu_max:
        raise RegularizationOverflowError(f"mu = {mu:.3e} exceeds {settings.mu_max:.3e}")
    return RegState(mu=mu, mu_bar=mu_bar, gamma=mu * f_new)


@dataclass
class IterateRecord:
    """Snapshot of one outer iteration, taken at its start.

    f/kkt/defect describe the iterate the iteration departs from; merit is f
    for solvers that line-search on f directly.  alpha is the accepted step
    size (nan if the iteration was rejected or terminal), m_f the predicted
    reduction of the QP model (nan if never computed), gamma/mu the
    regularization used to build this iteration's QP.
    """

    k: int
    f: float
    merit: float
    kkt: float
    alpha: float
    gamma: float
    mu: float
    m_f: float
    accepted: bool
    defect: float


@dataclass
class SolveResult:
    trajectory: Trajectory
    status: SolveStatus
    iterations: int            # accepted steps
    history: list[IterateRecord] = field(repr=False)
    f: float = math.nan
    kkt: float = math.nan
    defect: float = math.nan
    hessian_evals: int = 0


def rollout_controls(model: OcpModel, u0: Array, u: Array) -> Trajectory:
    """Simulate the dynamics open-loop from the given controls (x_1 = u0).

    Overflow during a diverging rollout is reported as RolloutDivergedError
    (with the first bad stage) rather than as numpy warnings.
    """
    x = np.empty((model.N + 1, model.n_x))
    x[0] = u0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, model.N + 1):
            try:
                x[i] = model.dynamics(i, x[i - 1], u[i - 1])
            except (OverflowError, FloatingPointError, ValueError):
                raise RolloutDivergedError(i) from None
            if not np.all(np.isfinite(x[i])):
                raise RolloutDivergedError(i)
    return Trajectory(u0=np.array(u0, dtype=float), u=np.array(u, dtype=float), x=x)


def nonlinear_rollout(
    model: OcpModel, bp: BackwardPass, base: Trajectory, alpha: float
) -> Trajectory:
    """Apply the QP gains through the exact dynamics.

    u0 = base.u0 + alpha k0, x_1 = u0, then u_i = base.u_i + alpha k_i +
    K_i (x_i - base.x_i) and x_{i+1} = phi_i(x_i, u_i).  The result is
    dynamically feasible by construction whatever alpha.  Raises
    RolloutDivergedError on non-finite states.
    """
    N, n_x, n_u = base.N, base.x.shape[1], base.u.shape[1]
    u0 = base.u0 + alpha * bp.k0
    x = np.empty((N + 1, n_x))
    u = np.empty((N, n_u))
    x[0] = u0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, N + 1):
            u[i - 1] = base.u[i - 1] + alpha * bp.k[i - 1] + bp.K[i - 1] @ (x[i - 1] - base.x[i - 1])
            try:
                x[i] = model.dynamics(i, x[i - 1], u[i - 1])
            except (OverflowError, FloatingPointError, ValueError):
                raise RolloutDivergedError(i) from None
            if not np.all(np.isfinite(x[i])):
                raise RolloutDivergedError(i)
    return Trajectory(u0=u0, u=u, x=x)


def control_gradient_from_qp(qp: QpData) -> tuple[Array, Array]:
    """Gradient of the reduced objective F(u) from already-linearized data.

    One adjoint sweep: lambda_{N+1} = p_term, grad_{u_i} = r_i + B_i' lambda,
    lambda_i = q_i + A_i' lambda, and grad_{u0} = lambda_1.
    """
    lam = qp.p_term
    gu = np.empty((qp.N, qp.n_u))
    for i in range(qp.N, 0, -1):
        gu[i - 1] = qp.r[i - 1] + qp.B[i - 1].T @ lam
        lam = qp.q[i - 1] + qp.A[i - 1].T @ lam
    return lam.copy(), gu


def control_gradient(model: OcpModel, focp: FeasibilityOcp, traj: Trajectory) -> tuple[Array, Array]:
    """Gradient of F at a dynamically feasible trajectory, per control.

    Returns (g_u0, g_u) with g_u stacking stages 1..N row-wise.
    """
    return control_gradient_from_qp(eval_stage_data(focp, traj, 0.0))


def gradient_inf_norm(g0: Array, gu: Array) -> float:
    return max(float(np.max(np.abs(g0))), float(np.max(np.abs(gu))) if gu.size else 0.0)


def backtracking_search(
    make_trial: Callable[[float], Trajectory],
    evaluate: Callable[[Trajectory], float],
    merit_base: float,
    m_pred: float,
    settings: SolverSettings,
) -> tuple[float, Trajectory, float]:
    """Armijo backtracking: accept alpha when merit drops by eta*alpha*m_pred.

    Starts at alpha = 1 and halves; trials that diverge or evaluate non-finite
    count as rejected.  Raises LineSearchFailedError below alpha_min.
    """
    alpha = 1.0
    while alpha >= settings.alpha_min:
        try:
            trial = make_trial(alpha)
            value = evaluate(trial)
        except (RolloutDivergedError, EvaluationError):
            trial, value = None, math.inf
        if math.isfinite(value) and merit_base - value >= settings.eta * alpha * m_pred:
            return alpha, trial, value
        alpha *= 0.5
    raise LineSearchFailedError(f"no acceptable step above alpha_min = {settings.alpha_min:g}")


def armijo_search(
    model: OcpModel,
    focp: FeasibilityOcp,
    base: Trajectory,
    bp: BackwardPass,
    f_base: float,
    m_f: float,
    settings: SolverSettings,
) -> tuple[float, Trajectory, float]:
    """Line search over nonlinear rollouts: f(trial) <= f_base - eta*alpha*m_f."""
    return backtracking_search(
        lambda alpha: nonlinear_rollout(model, bp, base, alpha),
        lambda trial: eval_objective(focp, trial),
        f_base,
        m_f,
        settings,
    )


def _project_to_feasible(
    model: OcpModel, focp: FeasibilityOcp, guess: Trajectory, settings: SolverSettings
) -> tuple[Trajectory, int]:
    """Map a guess onto the dynamics; returns (trajectory, #derivative evals)."""
    if dynamics_defect(model, guess) <= FEASIBLE_DEFECT_TOL:
        return guess, 0
    base = guess.copy()
    base.u0 = base.x[0].copy()  # the u0 = x_1 split carries no dynamics gap
    f_guess = eval_objective(focp, base)
    qp0 = eval_stage_data(focp, base, 0.0)
    mu = settings.mu0
    last_error: Exception | None = None
    for _ in range(settings.max_reg_restarts + 1):
        try:
            bp = backward_sweep(qp0.regularized(mu * f_guess))
            return nonlinear_rollout(model, bp, base, 1.0), 1
        except (NotPositiveDefiniteError, RolloutDivergedError) as exc:
            last_error = exc
            mu *= settings.lam
    raise last_error


def make_dynamically_feasible(
    model: OcpModel,
    focp: FeasibilityOcp,
    guess: Trajectory,
    settings: SolverSettings = SolverSettings(),
) -> Trajectory:
    """Turn an arbitrary guess into a dynamically feasible trajectory.

    Guesses already feasible to within FEASIBLE_DEFECT_TOL are returned
    unchanged.  Otherwise u0 is aligned with x_1, one backward sweep is taken
    at the guess (with gamma = mu0 * f(guess), escalating mu on failure), and
    the gains are rolled through the exact dynamics with a full step.
    """
    traj, _ = _project_to_feasible(model, focp, guess, settings)
    return traj


def solve(
    model: OcpModel, guess: Trajectory, settings: SolverSettings = SolverSettings()
) -> SolveResult:
    """Run the DDP feasibility solver from a guess.

    Status is Feasible once f <= eps_feas, Stationary once the control
    gradient drops below eps_stat (a local minimum of the violation that need
    not be feasible), MaxIter after max_iter outer iterations, RegFailure when
    the regularization schedule overflows or rejections repeat beyond
    max_reg_restarts.  Every iterate, including rejected-trial ones, shows up
    in the history; `iterations` counts accepted steps.
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
        g0, gu = control_gradient_from_qp(qp0)
        kkt = gradient_inf_norm(g0, gu)
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

        try:
            bp = backward_sweep(qp0.regularized(reg.gamma))
        except NotPositiveDefiniteError:
            bp = None
        m_f = math.nan
        accepted = False
        if bp is not None:
            m_f = -qp_optimal_objective(bp)
            try:
                alpha, trial, f_trial = armijo_search(model, focp, traj, bp, f, m_f, settings)
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
            # mu can only overflow here after a reduced step at the cap; stop
            # with the accepted iterate and fresh diagnostics.
            qp0 = eval_stage_data(focp, traj, 0.0)
            hessian_evals += 1
            kkt = gradient_inf_norm(*control_gradient_from_qp(qp0))
            defect = dynamics_defect(model, traj)
            history.append(IterateRecord(k + 1, f, f, kkt, math.nan, reg.gamma, reg.mu,
                                         math.nan, False, defect))
            status = SolveStatus.REG_FAILURE
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
