"""Riccati solver for the equality-constrained stagewise QP.

The QP minimizes sum_i [0.5 (dx_i, du_i)' H_i (dx_i, du_i) + (q_i, r_i)'(dx_i, du_i)]
plus the terminal quadratic, subject to dx_1 = du_0 and the linearized
dynamics dx_{i+1} = A_i dx_i + B_i du_i + b_i.  The backward sweep eliminates
stages N..1 and finishes with the auxiliary stage 0, which by convention has
R_0 = 0, r_0 = 0, B_0 = I, b_0 = 0, so D_0 = P_1 and d_0 = p_1.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve

from .ocp import QpData, Trajectory

Array = np.ndarray

# A Cholesky pivot at or below this is treated as a failed factorization.
MIN_PIVOT = 1e-14


class NotPositiveDefiniteError(RuntimeError):
    """A stage Hessian D_i failed its Cholesky factorization."""

    def __init__(self, stage: int):
        super().__init__(f"D at stage {stage} is not positive definite")
        self.stage = stage


class QpOracleError(RuntimeError):
    """The dense KKT system of the reference QP solver is singular."""


def _cholesky_pd(D: Array, stage: int) -> Array:
    """Lower Cholesky factor, rejecting non-positive pivots <= MIN_PIVOT."""
    try:
        L = np.linalg.cholesky(0.5 * (D + D.T))
    except np.linalg.LinAlgError:
        raise NotPositiveDefiniteError(stage) from None
    if float(np.min(np.diag(L)) ** 2) <= MIN_PIVOT:
        raise NotPositiveDefiniteError(stage)
    return L


@dataclass
class BackwardPass:
    """Feedforward/feedback gains and value-function data from one sweep.

    Stage arrays hold stages 1..N; the auxiliary stage 0 is stored separately
    (K0 is identically zero: there is no state preceding u0).  D is the
    pre-factorization Schur complement, L its lower Cholesky factor; P/p stack
    the value function over stages 1..N+1.
    """

    k0: Array   # (n_x,)
    K0: Array   # (n_x, n_x), zeros
    d0: Array   # (n_x,)
    D0: Array   # (n_x, n_x)
    L0: Array   # (n_x, n_x)
    k: Array    # (N, n_u)
    K: Array    # (N, n_u, n_x)
    d: Array    # (N, n_u)
    D: Array    # (N, n_u, n_u)
    L: Array    # (N, n_u, n_u)
    P: Array    # (N+1, n_x, n_x)
    p: Array    # (N+1, n_x)

    @property
    def N(self) -> int:
        return self.k.shape[0]


def backward_sweep(qp: QpData) -> BackwardPass:
    """Eliminate stages N..0, factorizing each D_i.

    Raises NotPositiveDefiniteError with the failing stage index when a D_i
    (or D_0 = P_1) is not numerically positive definite.
    """
    N, n_x, n_u = qp.N, qp.n_x, qp.n_u
    k = np.empty((N, n_u))
    K = np.empty((N, n_u, n_x))
    d = np.empty((N, n_u))
    D = np.empty((N, n_u, n_u))
    L = np.empty((N, n_u, n_u))
    P = np.empty((N + 1, n_x, n_x))
    p = np.empty((N + 1, n_x))
    P[N] = 0.5 * (qp.P_term + qp.P_term.T)
    p[N] = qp.p_term
    for i in range(N, 0, -1):
        j = i - 1
        A, B = qp.A[j], qp.B[j]
        PB = P[i] @ B
        Pb_p = P[i] @ qp.b[j] + p[i]
        Di = qp.R[j] + B.T @ PB
        Li = _cholesky_pd(Di, i)
        di = qp.r[j] + B.T @ Pb_p
        ki = -cho_solve((Li, True), di)
        Ki = -cho_solve((Li, True), qp.S[j] + PB.T @ A)
        Pi = qp.Q[j] + A.T @ (P[i] @ A) + (qp.S[j].T + A.T @ PB) @ Ki
        k[j], K[j], d[j], D[j], L[j] = ki, Ki, di, Di, Li
        P[j] = 0.5 * (Pi + Pi.T)
        p[j] = qp.q[j] + A.T @ Pb_p + Ki.T @ di
    # auxiliary stage 0: R_0 = 0, B_0 = I, b_0 = 0 collapse D_0 to P_1
    D0 = P[0]
    L0 = _cholesky_pd(D0, 0)
    d0 = p[0]
    k0 = -cho_solve((L0, True), d0)
    return BackwardPass(
        k0=k0, K0=np.zeros((n_x, n_x)), d0=d0, D0=D0, L0=L0,
        k=k, K=K, d=d, D=D, L=L, P=P, p=p,
    )


@dataclass
class QpStep:
    """QP step in deviation variables plus the shifted trajectory."""

    du0: Array         # (n_x,)
    du: Array          # (N, n_u)
    dx: Array          # (N+1, n_x)
    trajectory: Trajectory


def linear_rollout(bp: BackwardPass, qp: QpData, base: Trajectory, alpha: float) -> QpStep:
    """Forward sweep of the linearized dynamics with feedback.

    du_i = alpha k_i + K_i dx_i and dx_{i+1} = A_i dx_i + B_i du_i + b_i
    (the dynamics gap b_i is never scaled by alpha).  At alpha = 1 this is the
    exact QP optimum.
    """
    N, n_x, n_u = qp.N, qp.n_x, qp.n_u
    dx = np.empty((N + 1, n_x))
    du = np.empty((N, n_u))
    du0 = alpha * bp.k0
    dx[0] = du0
    for i in range(N):
        du[i] = alpha * bp.k[i] + bp.K[i] @ dx[i]
        dx[i + 1] = qp.A[i] @ dx[i] + qp.B[i] @ du[i] + qp.b[i]
    trial = Trajectory(u0=base.u0 + du0, u=base.u + du, x=base.x + dx)
    return QpStep(du0=du0, du=du, dx=dx, trajectory=trial)


def qp_optimal_objective(bp: BackwardPass) -> float:
    """Optimal QP objective, primal form: sum_i 0.5 k_i' D_i k_i + k_i' d_i."""
    total = 0.5 * float(bp.k0 @ (bp.D0 @ bp.k0)) + float(bp.k0 @ bp.d0)
    for i in range(bp.N):
        total += 0.5 * float(bp.k[i] @ (bp.D[i] @ bp.k[i])) + float(bp.k[i] @ bp.d[i])
    return total


def qp_optimal_objective_dual(bp: BackwardPass) -> float:
    """Optimal QP objective, dual form: -0.5 sum_i d_i' D_i^{-1} d_i."""
    total = -0.5 * float(bp.d0 @ cho_solve((bp.L0, True), bp.d0))
    for i in range(bp.N):
        total -= 0.5 * float(bp.d[i] @ cho_solve((bp.L[i], True), bp.d[i]))
    return total


@dataclass
class OracleSolution:
    """Reference QP solution from a dense KKT solve."""

    du0: Array
    du: Array
    dx: Array
    objective: float


def dense_qp_oracle(qp: QpData) -> OracleSolution:
    """Solve the stagewise QP by assembling and solving the full KKT system.

    Independent of the Riccati recursion; intended as a test reference at
    desk scale (KKT dimension capped at 2000).  Raises QpOracleError if the
    KKT matrix is singular.
    """
    N, n_x, n_u = qp.N, qp.n_x, qp.n_u
    n_z = n_x + N * (n_x + n_u) + n_x
    n_c = (N + 1) * n_x
    if n_z + n_c > 2000:
        raise ValueError(f"KKT dimension {n_z + n_c} exceeds the desk-scale cap 2000")

    def x_off(i: int) -> int:  # offset of dx_i, i in 1..N+1
        return n_x + (i - 1) * (n_x + n_u)

    def u_off(i: int) -> int:  # offset of du_i, i in 1..N
        return x_off(i) + n_x

    H = np.zeros((n_z, n_z))
    g = np.zeros(n_z)
    for i in range(1, N + 1):
        j = i - 1
        xs, us = slice(x_off(i), x_off(i) + n_x), slice(u_off(i), u_off(i) + n_u)
        H[xs, xs] = qp.Q[j]
        H[us, us] = qp.R[j]
        H[us, xs] = qp.S[j]
        H[xs, us] = qp.S[j].T
        g[xs] = qp.q[j]
        g[us] = qp.r[j]
    ts = slice(x_off(N + 1), x_off(N + 1) + n_x)
    H[ts, ts] = qp.P_term
    g[ts] = qp.p_term

    G = np.zeros((n_c, n_z))
    rhs = np.zeros(n_c)
    G[0:n_x, x_off(1):x_off(1) + n_x] = np.eye(n_x)
    G[0:n_x, 0:n_x] = -np.eye(n_x)
    for i in range(1, N + 1):
        j = i - 1
        rows = slice(i * n_x, (i + 1) * n_x)
        G[rows, x_off(i + 1):x_off(i + 1) + n_x] = np.eye(n_x)
        G[rows, x_off(i):x_off(i) + n_x] = -qp.A[j]
        G[rows, u_off(i):u_off(i) + n_u] = -qp.B[j]
        rhs[i * n_x:(i + 1) * n_x] = qp.b[j]

    kkt = np.zeros((n_z + n_c, n_z + n_c))
    kkt[:n_z, :n_z] = H
    kkt[:n_z, n_z:] = G.T
    kkt[n_z:, :n_z] = G
    try:
        sol = np.linalg.solve(kkt, np.concatenate([-g, rhs]))
    except np.linalg.LinAlgError as exc:
        raise QpOracleError(f"singular KKT system: {exc}") from None
    z = sol[:n_z]
    du0 = z[0:n_x]
    dx = np.empty((N + 1, n_x))
    du = np.empty((N, n_u))
    for i in range(1, N + 2):
        dx[i - 1] = z[x_off(i):x_off(i) + n_x]
        if i <= N:
            du[i - 1] = z[u_off(i):u_off(i) + n_u]
    objective = float(g @ z + 0.5 * z @ (H @ z))
    return OracleSolution(du0=du0, du=du, dx=dx, objective=objective)
