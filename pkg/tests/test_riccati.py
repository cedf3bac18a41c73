"""Riccati backward sweep, linear rollout, and the dense QP cross-check."""
from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fpddp import (
    NotPositiveDefiniteError,
    QpData,
    Trajectory,
    backward_sweep,
    dense_qp_oracle,
    linear_rollout,
    qp_optimal_objective,
    qp_optimal_objective_dual,
)

from conftest import qp_objective_value, random_qp


def scalar_qp() -> QpData:
    """N=1, all-ones scalar data; every sweep quantity is hand-checkable."""
    one = np.ones((1, 1, 1))
    zero = np.zeros((1, 1))
    return QpData(
        A=one.copy(), B=one.copy(), b=zero.copy(),
        q=zero.copy(), r=zero.copy(),
        Q=one.copy(), S=np.zeros((1, 1, 1)), R=one.copy(),
        p_term=np.array([1.0]), P_term=np.array([[1.0]]),
    )


def zero_trajectory(n_x: int, n_u: int, N: int) -> Trajectory:
    return Trajectory(u0=np.zeros(n_x), u=np.zeros((N, n_u)), x=np.zeros((N + 1, n_x)))


def test_backward_sweep_hand_values():
    bp = backward_sweep(scalar_qp())
    assert bp.D[0] == pytest.approx(2.0)
    assert bp.d[0] == pytest.approx(1.0)
    assert bp.k[0] == pytest.approx(-0.5)
    assert bp.K[0] == pytest.approx(-0.5)
    assert bp.P[0] == pytest.approx(1.5)   # cost-to-go at the first state
    assert bp.p[0] == pytest.approx(0.5)
    # auxiliary stage: D0 = P1, d0 = p1, k0 = -P1^{-1} p1, K0 = 0
    assert bp.D0 == pytest.approx(1.5)
    assert bp.d0 == pytest.approx(0.5)
    assert bp.k0 == pytest.approx(-1.0 / 3.0)
    assert np.all(bp.K0 == 0.0)


def test_rollout_and_objective_hand_values():
    qp = scalar_qp()
    bp = backward_sweep(qp)
    step = linear_rollout(bp, qp, zero_trajectory(1, 1, 1), 1.0)
    assert step.du0[0] == pytest.approx(-1.0 / 3.0)
    assert step.dx[0, 0] == pytest.approx(-1.0 / 3.0)
    assert step.du[0, 0] == pytest.approx(-1.0 / 3.0)
    assert step.dx[1, 0] == pytest.approx(-2.0 / 3.0)
    assert qp_optimal_objective(bp) == pytest.approx(-1.0 / 3.0)
    assert qp_optimal_objective_dual(bp) == pytest.approx(-1.0 / 3.0)


def test_matches_dense_oracle_on_random_instances():
    rng = np.random.default_rng(0)
    for _ in range(10):
        n_x = int(rng.integers(1, 5))
        n_u = int(rng.integers(1, 3))
        N = int(rng.integers(1, 11))
        qp = random_qp(rng, n_x, n_u, N)
        bp = backward_sweep(qp)
        step = linear_rollout(bp, qp, zero_trajectory(n_x, n_u, N), 1.0)
        oracle = dense_qp_oracle(qp)
        assert np.allclose(step.du0, oracle.du0, atol=1e-8)
        assert np.allclose(step.du, oracle.du, atol=1e-8)
        assert np.allclose(step.dx, oracle.dx, atol=1e-8)
        # objective evaluated at the sweep's primal equals the oracle's optimum
        f_at_step = qp_objective_value(qp, step.du0, step.du, step.dx)
        assert f_at_step == pytest.approx(oracle.objective, rel=1e-10, abs=1e-12)


def test_stagewise_objective_equals_oracle_without_gaps():
    # The stagewise optimal-value formula accounts for no gap constants, so it
    # equals the dense optimum exactly when all b_i = 0 (the solver's regime).
    rng = np.random.default_rng(9)
    for _ in range(10):
        qp = random_qp(rng, 3, 2, 6)
        qp.b[:] = 0.0
        bp = backward_sweep(qp)
        oracle = dense_qp_oracle(qp)
        assert qp_optimal_objective(bp) == pytest.approx(oracle.objective, rel=1e-10, abs=1e-12)


def test_both_objective_forms_agree():
    rng = np.random.default_rng(3)
    for _ in range(10):
        qp = random_qp(rng, 3, 2, 6)
        bp = backward_sweep(qp)
        primal = qp_optimal_objective(bp)
        dual = qp_optimal_objective_dual(bp)
        assert primal == pytest.approx(dual, rel=1e-10, abs=1e-12)


def test_not_positive_definite_reports_stage():
    qp = random_qp(np.random.default_rng(1), 2, 1, 5)
    qp.R[3] = np.array([[-1e3]])  # row index 3 holds stage 4's data
    with pytest.raises(NotPositiveDefiniteError) as err:
        backward_sweep(qp)
    assert err.value.stage == 4


def test_tiny_pivot_rejected():
    qp = scalar_qp()
    qp.R[0] = np.array([[-1.0 + 1e-15]])  # D = R + B P B ~ 1e-15: below pivot floor
    with pytest.raises(NotPositiveDefiniteError):
        backward_sweep(qp)


def test_rollout_keeps_gaps_unscaled():
    # dx_{i+1} = A dx_i + B du_i + b_i must hold with the FULL b at any alpha.
    rng = np.random.default_rng(5)
    qp = random_qp(rng, 2, 1, 4)
    bp = backward_sweep(qp)
    for alpha in (1.0, 0.5, 0.25):
        step = linear_rollout(bp, qp, zero_trajectory(2, 1, 4), alpha)
        assert np.allclose(step.du0, alpha * bp.k0)
        assert np.allclose(step.dx[0], step.du0)
        for i in range(4):
            du = alpha * bp.k[i] + bp.K[i] @ step.dx[i]
            assert np.allclose(step.du[i], du, atol=1e-12)
            pred = qp.A[i] @ step.dx[i] + qp.B[i] @ step.du[i] + qp.b[i]
            assert np.allclose(step.dx[i + 1], pred, atol=1e-12)


def test_oracle_rejects_huge_instances():
    qp = random_qp(np.random.default_rng(2), 4, 2, 500)
    with pytest.raises(ValueError):
        dense_qp_oracle(qp)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_zero_gap_instances_have_nonpositive_optimum(seed):
    # With b = 0 the zero step is admissible, so the optimal value cannot be
    # positive; its negative is the predicted reduction m_f >= 0.
    rng = np.random.default_rng(seed)
    qp = random_qp(rng, 2, 2, 5)
    qp.b[:] = 0.0
    bp = backward_sweep(qp)
    assert qp_optimal_objective(bp) <= 1e-12
