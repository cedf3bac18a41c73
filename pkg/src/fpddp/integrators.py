"""Fixed-step RK4 integration with forward sensitivity propagation."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

Array = np.ndarray
Field = Callable[[Array, Array], Array]
FieldJacobians = Callable[[Array, Array], tuple[Array, Array]]


def rk4_step(field: Field, x: Array, u: Array, h: float, n_steps: int = 1) -> Array:
    """Integrate xdot = field(x, u) over a stage of duration h with n_steps RK4 substeps."""
    tau = h / n_steps
    for _ in range(n_steps):
        k1 = field(x, u)
        k2 = field(x + 0.5 * tau * k1, u)
        k3 = field(x + 0.5 * tau * k2, u)
        k4 = field(x + tau * k3, u)
        x = x + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return x


def rk4_step_with_sensitivity(
    field: Field,
    field_jacobians: FieldJacobians,
    x: Array,
    u: Array,
    h: float,
    n_steps: int = 1,
) -> tuple[Array, Array, Array]:
    """RK4 step together with the Jacobians of the result w.r.t. x and u.

    Sensitivities are propagated exactly through each substep: the Jacobian of
    one substep is assembled from the stage Jacobians by the chain rule, then
    accumulated across substeps (A <- Dx A, B <- Dx B + Du).
    """
    n_x = x.shape[0]
    n_u = u.shape[0]
    tau = h / n_steps
    A = np.eye(n_x)
    B = np.zeros((n_x, n_u))
    for _ in range(n_steps):
        k1 = field(x, u)
        J1x, J1u = field_jacobians(x, u)

        x2 = x + 0.5 * tau * k1
        k2 = field(x2, u)
        J2x_f, J2u_f = field_jacobians(x2, u)
        # d k2 / d x = J2x (I + tau/2 dk1/dx), likewise for u
        dk1x, dk1u = J1x, J1u
        dk2x = J2x_f @ (np.eye(n_x) + 0.5 * tau * dk1x)
        dk2u = J2x_f @ (0.5 * tau * dk1u) + J2u_f

        x3 = x + 0.5 * tau * k2
        k3 = field(x3, u)
        J3x_f, J3u_f = field_jacobians(x3, u)
        dk3x = J3x_f @ (np.eye(n_x) + 0.5 * tau * dk2x)
        dk3u = J3x_f @ (0.5 * tau * dk2u) + J3u_f

        x4 = x + tau * k3
        k4 = field(x4, u)
        J4x_f, J4u_f = field_jacobians(x4, u)
        dk4x = J4x_f @ (np.eye(n_x) + tau * dk3x)
        dk4u = J4x_f @ (tau * dk3u) + J4u_f

        Dx = np.eye(n_x) + (tau / 6.0) * (dk1x + 2.0 * dk2x + 2.0 * dk3x + dk4x)
        Du = (tau / 6.0) * (dk1u + 2.0 * dk2u + 2.0 * dk3u + dk4u)

        x = x + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        A = Dx @ A
        B = Dx @ B + Du
    return x, A, B


@dataclass(frozen=True)
class Rk4Integrator:
    """Bundles a continuous-time field with a stage duration and substep count."""

    field: Field
    field_jacobians: FieldJacobians
    h: float
    n_steps: int = 1

    def step(self, x: Array, u: Array) -> Array:
        return rk4_step(self.field, x, u, self.h, self.n_steps)

    def step_with_sensitivity(self, x: Array, u: Array) -> tuple[Array, Array, Array]:
        return rk4_step_with_sensitivity(
            self.field, self.field_jacobians, x, u, self.h, self.n_steps
        )
