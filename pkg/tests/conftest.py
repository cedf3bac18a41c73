"""Shared helpers: random QP instances and finite-difference oracles."""
from __future__ import annotations

import numpy as np

from fpddp import (
    FeasibilityOcp,
    OcpModel,
    QpData,
    Trajectory,
    build_feasibility_problem,
    eval_objective,
    rollout_controls,
)


def random_qp(rng: np.random.Generator, n_x: int, n_u: int, N: int) -> QpData:
    """Random equality-constrained OCP-QP with SPD stage Hessians and gaps."""
    A = rng.standard_normal((N, n_x, n_x))
    B = rng.standard_normal((N, n_x, n_u))
    b = rng.standard_normal((N, n_x))
    q = rng.standard_normal((N, n_x))
    r = rng.standard_normal((N, n_u))
    Q = np.empty((N, n_x, n_x))
    S = np.empty((N, n_u, n_x))
    R = np.empty((N, n_u, n_u))
    for i in range(N):
        C = rng.standard_normal((n_x + n_u, n_x + n_u))
        H = C.T @ C + 0.5 * np.eye(n_x + n_u)
        Q[i] = H[:n_x, :n_x]
        S[i] = H[n_x:, :n_x]
        R[i] = H[n_x:, n_x:]
    Cterm = rng.standard_normal((n_x, n_x))
    return QpData(
        A=A, B=B, b=b, q=q, r=r, Q=Q, S=S, R=R,
        p_term=rng.standard_normal(n_x),
        P_term=Cterm.T @ Cterm + 0.5 * np.eye(n_x),
    )


def qp_objective_value(qp: QpData, du0: np.ndarray, du: np.ndarray, dx: np.ndarray) -> float:
    """Evaluate the stagewise QP objective at a given primal point."""
    total = 0.0
    for i in range(qp.N):
        xi, ui = dx[i], du[i]
        total += float(
            qp.q[i] @ xi + qp.r[i] @ ui
            + 0.5 * xi @ qp.Q[i] @ xi + ui @ qp.S[i] @ xi + 0.5 * ui @ qp.R[i] @ ui
        )
    xN = dx[qp.N]
    total += float(qp.p_term @ xN + 0.5 * xN @ qp.P_term @ xN)
    return total


def perturbed_feasible_point(
    model: OcpModel, guess: Trajectory, rng: np.random.Generator, scale: float
) -> Trajectory:
    """Random dynamically feasible trajectory near a known-good guess."""
    u0 = guess.u0 + scale * rng.standard_normal(guess.u0.shape)
    u = guess.u + scale * rng.standard_normal(guess.u.shape)
    return rollout_controls(model, u0, u)


def fd_control_gradient(
    model: OcpModel, focp: FeasibilityOcp, traj: Trajectory, eps: float = 1e-6
) -> tuple[np.ndarray, np.ndarray]:
    """Central finite differences of the reduced objective F(u0, u)."""

    def value(u0: np.ndarray, u: np.ndarray) -> float:
        return eval_objective(focp, rollout_controls(model, u0, u))

    g0 = np.empty_like(traj.u0)
    for j in range(traj.u0.size):
        d = np.zeros_like(traj.u0)
        d[j] = eps
        g0[j] = (value(traj.u0 + d, traj.u) - value(traj.u0 - d, traj.u)) / (2 * eps)
    gu = np.empty_like(traj.u)
    for i in range(traj.u.shape[0]):
        for j in range(traj.u.shape[1]):
            d = np.zeros_like(traj.u)
            d[i, j] = eps
            gu[i, j] = (value(traj.u0, traj.u + d) - value(traj.u0, traj.u - d)) / (2 * eps)
    return g0, gu


def fd_jacobian(fun, x: np.ndarray, eps: float = 1e-6) -> np.ndarray:
    """Central finite-difference Jacobian of a vector function of a vector."""
    f0 = np.asarray(fun(x))
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        d = np.zeros_like(x)
        d[j] = eps
        jac[:, j] = (np.asarray(fun(x + d)) - np.asarray(fun(x - d))) / (2 * eps)
    return jac


def model_focp(model: OcpModel) -> FeasibilityOcp:
    return build_feasibility_problem(model)
