"""Benchmark problems and initial-guess builders.

Two problems: a fixed-time point-to-point motion of a small unstable system
with control bounds, and a free-time cart-pendulum transfer with state/control
bounds and a circular obstacle for the pole endpoint (horizon length enters as
an extra constant state via time scaling).
"""
from __future__ import annotations

import math

import numpy as np

from .integrators import Rk4Integrator
from .ocp import OcpModel, Trajectory

Array = np.ndarray


class LqrInitializationError(RuntimeError):
    """The Riccati fixed-point iteration for the LQR guess did not converge."""


def _pair_rows(x: Array, target: Array, comps: list[int]) -> Array:
    """Rows (x_j - t_j, t_j - x_j) for each selected component: equality as two inequalities."""
    rows = []
    for j in comps:
        rows.append(x[j] - target[j])
        rows.append(target[j] - x[j])
    return np.array(rows)


def _pair_jacobian(n_x: int, comps: list[int]) -> Array:
    J = np.zeros((2 * len(comps), n_x))
    for row, j in enumerate(comps):
        J[2 * row, j] = 1.0
        J[2 * row + 1, j] = -1.0
    return J


def chen_allgoewer_model(
    zeta: float = 0.7,
    h: float = 0.25,
    n_substeps: int = 10,
    N: int = 20,
    u_max: float = 1.5,
    x_init: tuple[float, float] = (0.42, 0.45),
    x_goal: tuple[float, float] = (0.0, 0.1),
) -> OcpModel:
    """Two-state unstable system with one bounded control, fixed horizon.

    xdot_1 = x_2 + u (zeta + (1 - zeta) x_2)
    xdot_2 = x_1 + u (zeta - 4 (1 - zeta) x_2)

    The goal state enters as a paired-inequality terminal constraint; the
    control bound |u| <= u_max is the only path constraint.
    """
    goal = np.array(x_goal, dtype=float)

    def field(x: Array, u: Array) -> Array:
        x1, x2 = x
        return np.array([
            x2 + u[0] * (zeta + (1.0 - zeta) * x2),
            x1 + u[0] * (zeta - 4.0 * (1.0 - zeta) * x2),
        ])

    def field_jacobians(x: Array, u: Array) -> tuple[Array, Array]:
        x2 = x[1]
        Jx = np.array([
            [0.0, 1.0 + u[0] * (1.0 - zeta)],
            [1.0, -4.0 * u[0] * (1.0 - zeta)],
        ])
        Ju = np.array([
            [zeta + (1.0 - zeta) * x2],
            [zeta - 4.0 * (1.0 - zeta) * x2],
        ])
        return Jx, Ju

    integ = Rk4Integrator(field, field_jacobians, h, n_substeps)

    def dynamics(i: int, x: Array, u: Array) -> Array:
        return integ.step(x, u)

    def dynamics_jacobians(i: int, x: Array, u: Array):
        return integ.step_with_sensitivity(x, u)

    def path_constraint(i: int, x: Array, u: Array) -> Array:
        return np.array([u[0] - u_max, -u[0] - u_max])

    cu = np.array([[1.0], [-1.0]])
    cx = np.zeros((2, 2))

    def path_constraint_jacobians(i: int, x: Array, u: Array):
        return path_constraint(i, x, u), cx, cu

    term_jac = _pair_jacobian(2, [0, 1])

    def terminal_constraint(x: Array) -> Array:
        return _pair_rows(x, goal, [0, 1])

    def terminal_constraint_jacobians(x: Array):
        return terminal_constraint(x), term_jac

    return OcpModel(
        name="chen_allgoewer",
        n_x=2,
        n_u=1,
        N=N,
        x_init=np.array(x_init, dtype=float),
        dynamics=dynamics,
        dynamics_jacobians=dynamics_jacobians,
        path_constraint=path_constraint,
        path_constraint_jacobians=path_constraint_jacobians,
        terminal_constraint=terminal_constraint,
        terminal_constraint_jacobians=terminal_constraint_jacobians,
    )


def cart_pendulum_model(
    obstacle_x: float = 2.5,
    N: int = 30,
    n_substeps: int = 5,
) -> OcpModel:
    """Free-time cart-pendulum transfer with an obstacle for the pole endpoint.

    States (p, v, theta, omega, T): cart position/velocity, pole angle
    (theta = 0 is upright) and rate, plus the horizon length T as a constant
    state.  The continuous dynamics are integrated over a unit time interval
    scaled by T, so h = 1/N per stage.  The pole endpoint must stay outside a
    circle of radius 0.3 centered at (obstacle_x, 0.9); state boxes apply on
    interior stages, the control force is bounded by 5, and T >= 0.5.
    """
    m_cart, m_pole, length, grav = 1.0, 0.1, 0.8, 9.81
    x_lb = np.array([-1.0, -2.0, -0.25 * math.pi, -0.5])
    x_ub = np.array([6.0, 2.0, 0.25 * math.pi, 0.5])
    u_max = 5.0
    t_min = 0.5
    goal = np.array([5.0, 0.0, 0.0, 0.0, 0.0])
    radius_sq = 0.3 ** 2
    center_y = 0.9

    def field(z: Array, u: Array) -> Array:
        _, v, th, om, T = z
        F = u[0]
        s, c = math.sin(th), math.cos(th)
        den = m_cart + m_pole - m_pole * c * c
        vdot = (-m_pole * length * s * om * om + m_pole * grav * c * s + F) / den
        omdot = (-m_pole * length * c * s * om * om + F * c + (m_cart + m_pole) * grav * s) / (length * den)
        return np.array([T * v, T * vdot, T * om, T * omdot, 0.0])

    def field_jacobians(z: Array, u: Array) -> tuple[Array, Array]:
        _, v, th, om, T = z
        F = u[0]
        s, c = math.sin(th), math.cos(th)
        den = m_cart + m_pole - m_pole * c * c
        dden = 2.0 * m_pole * c * s           # d(den)/d(theta)
        vdot = (-m_pole * length * s * om * om + m_pole * grav * c * s + F) / den
        omdot = (-m_pole * length * c * s * om * om + F * c + (m_cart + m_pole) * grav * s) / (length * den)
        c2s2 = c * c - s * s
        dv_dth = (-m_pole * length * c * om * om + m_pole * grav * c2s2) / den - vdot * dden / den
        dv_dom = -2.0 * m_pole * length * s * om / den
        dom_dth = (-m_pole * length * c2s2 * om * om - F * s + (m_cart + m_pole) * grav * c) / (length * den) \
            - omdot * dden / den
        dom_dom = -2.0 * m_pole * c * s * om / den
        Jx = np.array([
            [0.0, T, 0.0, 0.0, v],
            [0.0, 0.0, T * dv_dth, T * dv_dom, vdot],
            [0.0, 0.0, 0.0, T, om],
            [0.0, 0.0, T * dom_dth, T * dom_dom, omdot],
            [0.0, 0.0, 0.0, 0.0, 0.0],
        ])
        Ju = np.array([[0.0], [T / den], [0.0], [T * c / (length * den)], [0.0]])
        return Jx, Ju

    integ = Rk4Integrator(field, field_jacobians, 1.0 / N, n_substeps)

    def dynamics(i: int, x: Array, u: Array) -> Array:
        return integ.step(x, u)

    def dynamics_jacobians(i: int, x: Array, u: Array):
        return integ.step_with_sensitivity(x, u)

    def _obstacle(x: Array) -> tuple[float, Array]:
        p, th = x[0], x[2]
        s, c = math.sin(th), math.cos(th)
        ex = p + length * s - obstacle_x
        ey = length * c - center_y
        val = radius_sq - ex * ex - ey * ey
        grad = np.zeros(5)
        grad[0] = -2.0 * ex
        grad[2] = -2.0 * ex * length * c + 2.0 * ey * length * s
        return val, grad

    def path_constraint(i: int, x: Array, u: Array) -> Array:
        rows = [u[0] - u_max, -u[0] - u_max, _obstacle(x)[0]]
        if i >= 2:
            rows.extend(x_lb - x[:4])
            rows.extend(x[:4] - x_ub)
            rows.append(t_min - x[4])
        return np.array(rows)

    def path_constraint_jacobians(i: int, x: Array, u: Array):
        c = path_constraint(i, x, u)
        n_c = c.shape[0]
        Cx = np.zeros((n_c, 5))
        Cu = np.zeros((n_c, 1))
        Cu[0, 0] = 1.0
        Cu[1, 0] = -1.0
        Cx[2] = _obstacle(x)[1]
        if i >= 2:
            for j in range(4):
                Cx[3 + j, j] = -1.0
                Cx[7 + j, j] = 1.0
            Cx[11, 4] = -1.0
        return c, Cx, Cu

    term_jac = _pair_jacobian(5, [0, 1, 2, 3])

    def terminal_constraint(x: Array) -> Array:
        return _pair_rows(x, goal, [0, 1, 2, 3])

    def terminal_constraint_jacobians(x: Array):
        return terminal_constraint(x), term_jac

    return OcpModel(
        name="cart_pendulum",
        n_x=5,
        n_u=1,
        N=N,
        x_init=np.zeros(5),
        dynamics=dynamics,
        dynamics_jacobians=dynamics_jacobians,
        path_constraint=path_constraint,
        path_constraint_jacobians=path_constraint_jacobians,
        terminal_constraint=terminal_constraint,
        terminal_constraint_jacobians=terminal_constraint_jacobians,
        init_mask=np.array([1.0, 1.0, 1.0, 1.0, 0.0]),
    )


def lqr_initial_guess(model: OcpModel, max_sweeps: int = 10_000, tol: float = 1e-12) -> Trajectory:
    """Dynamically feasible guess from an LQR feedback at the origin.

    The discretized dynamics are linearized at x = 0, u = 0; the discrete
    Riccati equation with unit weights is solved by fixed-point iteration
    (LqrInitializationError after max_sweeps); the closed loop u = -K x is
    then simulated from the model's initial state.  Controls are not clipped
    to any bounds.
    """
    n_x, n_u = model.n_x, model.n_u
    _, A, B = model.dynamics_jacobians(1, np.zeros(n_x), np.zeros(n_u))
    Q, R = np.eye(n_x), np.eye(n_u)
    P = np.eye(n_x)
    for _ in range(max_sweeps):
        BtP = B.T @ P
        K = np.linalg.solve(R + BtP @ B, BtP @ A)
        P_next = Q + A.T @ P @ (A - B @ K)
        P_next = 0.5 * (P_next + P_next.T)
        if float(np.max(np.abs(P_next - P))) <= tol:
            P = P_next
            break
        P = P_next
    else:
        raise LqrInitializationError(f"no fixed point after {max_sweeps} sweeps")
    BtP = B.T @ P
    K = np.linalg.solve(R + BtP @ B, BtP @ A)

    x = np.empty((model.N + 1, n_x))
    u = np.empty((model.N, n_u))
    x[0] = model.x_init
    for i in range(1, model.N + 1):
        u[i - 1] = -K @ x[i - 1]
        x[i] = model.dynamics(i, x[i - 1], u[i - 1])
    return Trajectory(u0=x[0].copy(), u=u, x=x)


def constant_guess(model: OcpModel, x_const: Array) -> Trajectory:
    """Constant-state, zero-control guess (feasible only at equilibria)."""
    x = np.tile(np.asarray(x_const, dtype=float), (model.N + 1, 1))
    u = np.zeros((model.N, model.n_u))
    return Trajectory(u0=x[0].copy(), u=u, x=x)


MODEL_BUILDERS = {
    "chen_allgoewer": chen_allgoewer_model,
    "cart_pendulum": cart_pendulum_model,
}


def make_model(name: str, **params) -> OcpModel:
    """Build a registered benchmark model by name."""
    try:
        builder = MODEL_BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; available: {sorted(MODEL_BUILDERS)}") from None
    return builder(**params)


def default_guess(model: OcpModel) -> Trajectory:
    """The guess each benchmark is meant to start from."""
    if model.name == "chen_allgoewer":
        return lqr_initial_guess(model)
    if model.name == "cart_pendulum":
        start = np.array([0.0, 0.0, 0.0, 0.0, 5.0])
        return constant_guess(model, start)
    raise ValueError(f"no default guess for model {model.name!r}")
