"""Discrete-time OCP description and its least-squares feasibility reformulation.

A trajectory-feasibility problem asks for states and controls satisfying a
fixed initial condition, the discrete dynamics, stagewise path inequalities
and a terminal inequality.  It is recast here as an unconstrained nonlinear
least-squares problem in the controls: the initial state becomes an auxiliary
control u0, states are eliminated through the dynamics, and every remaining
requirement is penalized through

    f(x, u) = 0.5 * ||m (x_1 - x_init)||^2
            + 0.5 * sum_i ||max(0, c_i(x_i, u_i))||^2
            + 0.5 * ||max(0, c_term(x_{N+1}))||^2

so f = 0 exactly at feasible points.  Stages are indexed 1..N, the terminal
state is x_{N+1}; the clip max(0, .) acts componentwise.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

Array = np.ndarray


class ModelDimensionError(ValueError):
    """A model callback returned an array of the wrong shape."""


class EvaluationError(RuntimeError):
    """A model callback produced non-finite values; carries the stage index."""

    def __init__(self, stage: int, message: str):
        super().__init__(f"stage {stage}: {message}")
        self.stage = stage


@dataclass(frozen=True)
class OcpModel:
    """Problem data: dimensions, initial state, dynamics and constraint callbacks.

    Callbacks take the 1-based stage index i (1..N for path quantities).
    ``dynamics_jacobians`` returns (x_next, A, B) with A = d x_next / d x and
    B = d x_next / d u.  Path/terminal constraints are inequality rows
    c(.) <= 0; a stage may have zero rows.  ``init_mask`` is a 0/1 vector
    selecting which components of x_1 are pinned to ``x_init`` (None pins all;
    free-time reformulations leave the horizon state unpinned).
    """

    name: str
    n_x: int
    n_u: int
    N: int
    x_init: Array
    dynamics: Callable[[int, Array, Array], Array]
    dynamics_jacobians: Callable[[int, Array, Array], tuple[Array, Array, Array]]
    path_constraint: Callable[[int, Array, Array], Array]
    path_constraint_jacobians: Callable[[int, Array, Array], tuple[Array, Array, Array]]
    terminal_constraint: Callable[[Array], Array]
    terminal_constraint_jacobians: Callable[[Array], tuple[Array, Array]]
    init_mask: Array | None = None

    def initial_mask(self) -> Array:
        if self.init_mask is None:
            return np.ones(self.n_x)
        return np.asarray(self.init_mask, dtype=float)


@dataclass
class Trajectory:
    """Decision variables of the feasibility problem.

    u0 is the auxiliary control that becomes the first state (x_1 = u0 on
    dynamically feasible iterates); u stacks u_1..u_N row-wise; x stacks
    x_1..x_{N+1} row-wise.
    """

    u0: Array  # (n_x,)
    u: Array   # (N, n_u)
    x: Array   # (N+1, n_x)

    @property
    def N(self) -> int:
        return self.u.shape[0]

    def copy(self) -> "Trajectory":
        return Trajectory(self.u0.copy(), self.u.copy(), self.x.copy())


@dataclass(frozen=True)
class FeasibilityOcp:
    """Stage-cost view of the feasibility problem for a validated model."""

    model: OcpModel

    def stage_cost(self, i: int, x: Array, u: Array) -> float:
        """f_i for a path stage i in 1..N; stage 1 adds the initial-state penalty."""
        c = self.model.path_constraint(i, x, u)
        val = 0.5 * float(np.maximum(c, 0.0) @ np.maximum(c, 0.0))
        if i == 1:
            res = self.model.initial_mask() * (x - self.model.x_init)
            val += 0.5 * float(res @ res)
        return val

    def terminal_cost(self, x: Array) -> float:
        c = self.model.terminal_constraint(x)
        cp = np.maximum(c, 0.0)
        return 0.5 * float(cp @ cp)


@dataclass
class QpData:
    """Stagewise linear-quadratic data from one linearization of the problem.

    Arrays stack stages 1..N along the first axis.  b_i is the dynamics gap
    phi_i(x_i, u_i) - x_{i+1} (zero on feasible iterates); q/r are cost
    gradients, (Q, S, R) the (regularized) Hessian blocks with S of shape
    (n_u, n_x); p_term/P_term belong to the terminal stage.
    """

    A: Array       # (N, n_x, n_x)
    B: Array       # (N, n_x, n_u)
    b: Array       # (N, n_x)
    q: Array       # (N, n_x)
    r: Array       # (N, n_u)
    Q: Array       # (N, n_x, n_x)
    S: Array       # (N, n_u, n_x)
    R: Array       # (N, n_u, n_u)
    p_term: Array  # (n_x,)
    P_term: Array  # (n_x, n_x)

    @property
    def N(self) -> int:
        return self.A.shape[0]

    @property
    def n_x(self) -> int:
        return self.A.shape[1]

    @property
    def n_u(self) -> int:
        return self.B.shape[2]

    def regularized(self, gamma: float) -> "QpData":
        """Return a copy with gamma * I added to every Hessian block (Q, R, P_term)."""
        return replace(
            self,
            Q=self.Q + gamma * np.eye(self.n_x),
            R=self.R + gamma * np.eye(self.n_u),
            P_term=self.P_term + gamma * np.eye(self.n_x),
        )


def _check_shape(arr: Array, shape: tuple[int, ...], stage: int, what: str) -> Array:
    arr = np.asarray(arr, dtype=float)
    if arr.shape != shape:
        raise ModelDimensionError(
            f"stage {stage}: {what} has shape {arr.shape}, expected {shape}"
        )
    return arr


def build_feasibility_problem(model: OcpModel) -> FeasibilityOcp:
    """Validate model dimensions at every stage and wrap the model.

    Each callback is probed once at (x_init-padded, zero control); shape
    mismatches raise ModelDimensionError naming the stage.  Constraint row
    counts may differ per stage, but value and Jacobian rows must agree.
    """
    n_x, n_u, N = model.n_x, model.n_u, model.N
    if np.asarray(model.x_init).shape != (n_x,):
        raise ModelDimensionError(
            f"stage 1: x_init has shape {np.asarray(model.x_init).shape}, expected {(n_x,)}"
        )
    if model.initial_mask().shape != (n_x,):
        raise ModelDimensionError("stage 1: init_mask length does not match n_x")
    x = np.asarray(model.x_init, dtype=float)
    u = np.zeros(n_u)
    for i in range(1, N + 1):
        x_next = _check_shape(model.dynamics(i, x, u), (n_x,), i, "dynamics value")
        xj, A, B = model.dynamics_jacobians(i, x, u)
        _check_shape(xj, (n_x,), i, "dynamics value (jacobian eval)")
        _check_shape(A, (n_x, n_x), i, "dynamics A")
        _check_shape(B, (n_x, n_u), i, "dynamics B")
        c = np.asarray(model.path_constraint(i, x, u), dtype=float)
        if c.ndim != 1:
            raise ModelDimensionError(f"stage {i}: path constraint must be a vector")
        cj, Cx, Cu = model.path_constraint_jacobians(i, x, u)
        n_c = c.shape[0]
        _check_shape(cj, (n_c,), i, "path constraint value (jacobian eval)")
        _check_shape(Cx, (n_c, n_x), i, "path constraint Cx")
        _check_shape(Cu, (n_c, n_u), i, "path constraint Cu")
        x = x_next
    c = np.asarray(model.terminal_constraint(x), dtype=float)
    if c.ndim != 1:
        raise ModelDimensionError(f"stage {N + 1}: terminal constraint must be a vector")
    cj, Cx = model.terminal_constraint_jacobians(x)
    _check_shape(cj, (c.shape[0],), N + 1, "terminal constraint value (jacobian eval)")
    _check_shape(Cx, (c.shape[0], n_x), N + 1, "terminal constraint Cx")
    return FeasibilityOcp(model)


def eval_objective(focp: FeasibilityOcp, traj: Trajectory) -> float:
    """Total feasibility objective f = sum of stage costs plus terminal cost.

    Raises EvaluationError (with the offending stage) on non-finite values.
    """
    model = focp.model
    total = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for i in range(1, model.N + 1):
            val = focp.stage_cost(i, traj.x[i - 1], traj.u[i - 1])
            if not np.isfinite(val):
                raise EvaluationError(i, "non-finite stage cost")
            total += val
        val = focp.terminal_cost(traj.x[model.N])
        if not np.isfinite(val):
            raise EvaluationError(model.N + 1, "non-finite terminal cost")
    return total + val


def eval_stage_data(focp: FeasibilityOcp, traj: Trajectory, gamma: float = 0.0) -> QpData:
    """Linearize dynamics and build gradients plus Gauss-Newton Hessian blocks.

    Only constraint rows with strictly positive residual enter the active set
    (a row at exactly zero contributes neither gradient nor curvature).  Each
    Hessian block then receives gamma * I; stage 1 additionally carries the
    identity block of the initial-state penalty on its masked components.
    """
    model = focp.model
    n_x, n_u, N = model.n_x, model.n_u, model.N
    A = np.empty((N, n_x, n_x))
    B = np.empty((N, n_x, n_u))
    b = np.empty((N, n_x))
    q = np.empty((N, n_x))
    r = np.empty((N, n_u))
    Q = np.empty((N, n_x, n_x))
    S = np.empty((N, n_u, n_x))
    R = np.empty((N, n_u, n_u))
    for i in range(1, N + 1):
        x, u = traj.x[i - 1], traj.u[i - 1]
        x_next, Ai, Bi = model.dynamics_jacobians(i, x, u)
        A[i - 1] = Ai
        B[i - 1] = Bi
        b[i - 1] = x_next - traj.x[i]
        c, Cx, Cu = model.path_constraint_jacobians(i, x, u)
        cp = np.maximum(c, 0.0)
        act = c > 0.0
        Cx_a, Cu_a = Cx[act], Cu[act]
        q[i - 1] = Cx.T @ cp
        r[i - 1] = Cu.T @ cp
        Q[i - 1] = Cx_a.T @ Cx_a
        S[i - 1] = Cu_a.T @ Cx_a
        R[i - 1] = Cu_a.T @ Cu_a
        if i == 1:
            mask = model.initial_mask()
            q[0] += mask * (x - model.x_init)
            Q[0] += np.diag(mask)
    c, Cx = model.terminal_constraint_jacobians(traj.x[N])
    cp = np.maximum(c, 0.0)
    act = c > 0.0
    Cx_a = Cx[act]
    p_term = Cx.T @ cp
    P_term = Cx_a.T @ Cx_a
    qp = QpData(A=A, B=B, b=b, q=q, r=r, Q=Q, S=S, R=R, p_term=p_term, P_term=P_term)
    if gamma != 0.0:
        qp = qp.regularized(gamma)
    return qp


def dynamics_defect(model: OcpModel, traj: Trajectory) -> float:
    """Max-norm violation of x_1 = u0 and x_{i+1} = phi_i(x_i, u_i)."""
    defect = float(np.max(np.abs(traj.x[0] - traj.u0)))
    for i in range(1, model.N + 1):
        gap = traj.x[i] - model.dynamics(i, traj.x[i - 1], traj.u[i - 1])
        defect = max(defect, float(np.max(np.abs(gap))))
    return defect


def _max_clip(c: Array) -> float:
    if c.size == 0:
        return 0.0
    return float(np.max(np.maximum(c, 0.0)))


@dataclass(frozen=True)
class ViolationReport:
    """Max-norm violations of the original problem, grouped by requirement."""

    initial: float
    dynamics: float
    path: float
    terminal: float

    @property
    def total(self) -> float:
        return max(self.initial, self.dynamics, self.path, self.terminal)


def violation_report(model: OcpModel, traj: Trajectory) -> ViolationReport:
    """Constraint violations of (x, u) under the original problem.

    The auxiliary control u0 plays no role here; the initial component uses
    the masked pinned states only.
    """
    mask = model.initial_mask()
    initial = float(np.max(np.abs(mask * (traj.x[0] - model.x_init))))
    dyn = 0.0
    path = 0.0
    for i in range(1, model.N + 1):
        gap = traj.x[i] - model.dynamics(i, traj.x[i - 1], traj.u[i - 1])
        dyn = max(dyn, float(np.max(np.abs(gap))))
        path = max(path, _max_clip(np.asarray(model.path_constraint(i, traj.x[i - 1], traj.u[i - 1]))))
    terminal = _max_clip(np.asarray(model.terminal_constraint(traj.x[model.N])))
    return ViolationReport(initial=initial, dynamics=dyn, path=path, terminal=terminal)
