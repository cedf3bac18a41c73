"""End-to-end acceptance gate: one test per release criterion.

Each test pins the documented tolerance and budget for its criterion; the
expensive benchmark runs are shared through module-scoped fixtures.
"""
from __future__ import annotations

import math
import time

import numpy as np
import pytest

from fpddp import (
    DmsSettings,
    RegState,
    SolveStatus,
    SolverSettings,
    build_feasibility_problem,
    cart_pendulum_model,
    chen_allgoewer_model,
    control_gradient,
    default_guess,
    dense_qp_oracle,
    dynamics_defect,
    eval_objective,
    eval_stage_data,
    linear_rollout,
    make_model,
    nonlinear_rollout,
    performance_profile,
    rollout_controls,
    solve,
    solve_dms,
    solve_dss,
)
from fpddp.bench import RunConfig, RunRecord, execute_run
from fpddp.riccati import backward_sweep, qp_optimal_objective, qp_optimal_objective_dual

from conftest import fd_control_gradient, perturbed_feasible_point, random_qp


@pytest.fixture(scope="module")
def chen_runs():
    model = chen_allgoewer_model()
    guess = default_guess(model)
    t0 = time.perf_counter()
    runs = {
        "fpddp": solve(model, guess),
        "dss": solve_dss(model, guess),
        "dms_light": solve_dms(model, guess, DmsSettings(sigma=0.01)),
        "dms_heavy": solve_dms(model, guess, DmsSettings(sigma=1.0)),
    }
    wall = time.perf_counter() - t0
    return model, runs, wall


@pytest.fixture(scope="module")
def cart_runs():
    model = cart_pendulum_model()
    guess = default_guess(model)
    return model, {
        "fpddp": solve(model, guess),
        "dss": solve_dss(model, guess),
    }


@pytest.fixture(scope="module")
def obstacle_sweep():
    values = np.linspace(0.7, 4.3, 100)
    t0 = time.perf_counter()
    outcomes: list[tuple[float, RunRecord, object]] = []
    for v in values:
        config = RunConfig(problem="cart_pendulum", solver="fpddp", obstacle_x=float(v))
        try:
            record, result = execute_run(config)
        except Exception as exc:  # a crash is a failed instance, not a crashed sweep
            record, result = None, exc
        outcomes.append((float(v), record, result))
    wall = time.perf_counter() - t0
    return outcomes, wall


def test_criterion_1_riccati_matches_dense_oracle():
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    for _ in range(30):
        n_x = int(rng.integers(1, 5))
        n_u = int(rng.integers(1, 3))
        N = int(rng.integers(1, 11))
        qp = random_qp(rng, n_x, n_u, N)
        qp.b[:] = 0.0  # the solver linearizes only dynamically feasible iterates
        bp = backward_sweep(qp)
        base = rollout_controls(  # zero base trajectory of matching shapes
            _identity_model(n_x, n_u, N), np.zeros(n_x), np.zeros((N, n_u))
        )
        step = linear_rollout(bp, qp, base, 1.0)
        oracle = dense_qp_oracle(qp)
        assert np.allclose(step.du0, oracle.du0, atol=1e-8)
        assert np.allclose(step.du, oracle.du, atol=1e-8)
        assert np.allclose(step.dx, oracle.dx, atol=1e-8)
        primal_form = qp_optimal_objective(bp)
        dual_form = qp_optimal_objective_dual(bp)
        assert primal_form == pytest.approx(oracle.objective, rel=1e-10, abs=1e-12)
        assert dual_form == pytest.approx(oracle.objective, rel=1e-10, abs=1e-12)
    assert time.perf_counter() - t0 < 1.0


def _identity_model(n_x, n_u, N):
    from fpddp import OcpModel

    return OcpModel(
        name="id", n_x=n_x, n_u=n_u, N=N, x_init=np.zeros(n_x),
        dynamics=lambda i, x, u: x,
        dynamics_jacobians=lambda i, x, u: (x, np.eye(n_x), np.zeros((n_x, n_u))),
        path_constraint=lambda i, x, u: np.zeros(0),
        path_constraint_jacobians=lambda i, x, u: (
            np.zeros(0), np.zeros((0, n_x)), np.zeros((0, n_u))),
        terminal_constraint=lambda x: np.zeros(0),
        terminal_constraint_jacobians=lambda x: (np.zeros(0), np.zeros((0, n_x))),
    )


def test_criterion_2_gradients_match_finite_differences():
    t0 = time.perf_counter()
    cases = [
        (chen_allgoewer_model(), 0.05),
        (cart_pendulum_model(), 0.1),
    ]
    rng = np.random.default_rng(7)
    for model, scale in cases:
        focp = build_feasibility_problem(model)
        guess = default_guess(model)
        for _ in range(10):
            traj = perturbed_feasible_point(model, guess, rng, scale)
            g0, gu = control_gradient(model, focp, traj)
            g0_fd, gu_fd = fd_control_gradient(model, focp, traj)
            assert np.allclose(g0, g0_fd, rtol=1e-5, atol=1e-6)
            assert np.allclose(gu, gu_fd, rtol=1e-5, atol=1e-6)

            qp = eval_stage_data(focp, traj, 0.0)
            for stage in rng.choice(np.arange(1, model.N + 1), size=2, replace=False):
                i = int(stage)
                x, u = traj.x[i - 1].copy(), traj.u[i - 1].copy()
                q_fd = _fd_grad(lambda v: focp.stage_cost(i, v, u), x)
                r_fd = _fd_grad(lambda v: focp.stage_cost(i, x, v), u)
                assert np.allclose(qp.q[i - 1], q_fd, rtol=1e-5, atol=1e-6)
                assert np.allclose(qp.r[i - 1], r_fd, rtol=1e-5, atol=1e-6)
            p_fd = _fd_grad(focp.terminal_cost, traj.x[model.N].copy())
            assert np.allclose(qp.p_term, p_fd, rtol=1e-5, atol=1e-6)
    assert time.perf_counter() - t0 < 10.0


def _fd_grad(fun, x, eps=1e-6):
    g = np.empty_like(x)
    for j in range(x.size):
        d = np.zeros_like(x)
        d[j] = eps
        g[j] = (fun(x + d) - fun(x - d)) / (2 * eps)
    return g


def test_criterion_3_rollout_iterates_stay_feasible(chen_runs, cart_runs):
    chen_model, chen, _ = chen_runs
    cart_model, cart = cart_runs
    for result in (chen["fpddp"], chen["dss"], cart["fpddp"], cart["dss"]):
        assert all(rec.defect <= 1e-12 for rec in result.history)
    assert dynamics_defect(chen_model, chen["fpddp"].trajectory) <= 1e-12
    assert dynamics_defect(cart_model, cart["fpddp"].trajectory) <= 1e-12


def test_criterion_4_fixed_time_benchmark_iteration_counts(chen_runs):
    _, runs, wall = chen_runs
    fpddp, dss = runs["fpddp"], runs["dss"]
    light, heavy = runs["dms_light"], runs["dms_heavy"]

    assert wall < 5.0, f"benchmark suite took {wall:.2f}s (budget 5s)"
    assert fpddp.status is SolveStatus.FEASIBLE and fpddp.f <= 1e-12
    accepted = [rec for rec in fpddp.history if rec.accepted]
    assert all(rec.alpha == 1.0 for rec in accepted), "expected only full steps"
    assert dss.status is SolveStatus.FEASIBLE
    assert light.status is SolveStatus.FEASIBLE
    assert heavy.status is SolveStatus.FEASIBLE
    assert 4 <= light.iterations <= 10, (
        f"multiple shooting (light penalty) took {light.iterations} iterations, "
        f"outside the expected window [4, 10]")
    assert heavy.iterations > 3 * light.iterations, (
        f"heavy penalty took {heavy.iterations} iterations, expected more than "
        f"3x the light-penalty count ({light.iterations})")
    assert 4 <= fpddp.iterations <= 8, (
        f"solver took {fpddp.iterations} iterations, outside the expected window [4, 8]")
    assert 12 <= dss.iterations <= 30, (
        f"single shooting took {dss.iterations} iterations, outside the expected "
        f"window [12, 30]")


def test_criterion_5_obstacle_sweep_success_rate(obstacle_sweep):
    outcomes, wall = obstacle_sweep
    assert wall < 120.0, f"sweep took {wall:.1f}s (budget 120s)"
    assert len(outcomes) == 100

    feasible = [(v, rec, res) for v, rec, res in outcomes
                if rec is not None and rec.status == "Feasible"]
    assert len(feasible) >= 95, f"only {len(feasible)}/100 instances solved"

    for v, record, result in feasible:
        assert record.final_f <= 1e-8
        assert record.final_defect <= 1e-12
        # independent re-simulation from the stored controls
        model = make_model("cart_pendulum", obstacle_x=v)
        traj = result.trajectory
        resim = rollout_controls(model, traj.u0, traj.u)
        assert np.max(np.abs(resim.x - traj.x)) <= 1e-9
        focp = build_feasibility_problem(model)
        assert eval_objective(focp, resim) <= 1e-8
        assert dynamics_defect(model, resim) <= 1e-12


def test_criterion_6_rollout_step_agreement_is_second_order(chen_runs, cart_runs):
    for model in (chen_runs[0], cart_runs[0]):
        focp = build_feasibility_problem(model)
        base = default_guess(model)
        reg = RegState.initial(SolverSettings(), eval_objective(focp, base))
        qp = eval_stage_data(focp, base, 0.0).regularized(reg.gamma)
        bp = backward_sweep(qp)
        full = linear_rollout(bp, qp, base, 1.0)
        ratios = []
        for alpha in (1.0, 0.5, 0.25, 0.125):
            ddp = nonlinear_rollout(model, bp, base, alpha)
            diff = max(
                float(np.max(np.abs((ddp.u - base.u) - alpha * full.du))),
                float(np.max(np.abs((ddp.u0 - base.u0) - alpha * full.du0))),
            )
            ratios.append(diff / alpha**2)
        assert all(math.isfinite(r) for r in ratios)
        for previous, current in zip(ratios, ratios[1:]):
            assert current <= 2.0 * previous + 1e-12, (
                f"second-order ratio grew from {previous:.3e} to {current:.3e}")


def test_criterion_7_decrease_and_predicted_reduction_signs(chen_runs, cart_runs):
    _, chen, _ = chen_runs
    _, cart = cart_runs
    for result in list(chen.values()) + list(cart.values()):
        accepted = [rec for rec in result.history if rec.accepted]
        fs = [rec.f for rec in accepted] + [result.f]
        fs = [f for f in fs if math.isfinite(f)]
        assert all(b < a for a, b in zip(fs, fs[1:])), "accepted f must strictly decrease"
        for rec in result.history:
            if math.isfinite(rec.m_f):
                assert rec.m_f > 0.0, f"iteration {rec.k}: predicted reduction {rec.m_f}"


def test_criterion_8_regularization_vanishes(chen_runs):
    _, runs, _ = chen_runs
    history = runs["fpddp"].history
    first, last = history[0], history[-1]
    assert last.gamma <= 1e-12 * last.mu * (1.0 + 1e-12), (
        f"final gamma {last.gamma:.3e} not consistent with f <= 1e-12 (mu {last.mu:.3e})")
    assert last.gamma <= 1e-12 * SolverSettings().mu_max
    assert last.gamma < first.gamma


def test_criterion_9_performance_profile_properties():
    def rec(solver, instance, wall, status="Feasible"):
        return RunRecord(
            problem="p", solver=solver, sigma=math.nan, obstacle_x=float(instance),
            seed=0, status=status, iterations=1, hessian_evals=2, wall_time=wall,
            final_f=0.0 if status == "Feasible" else 1.0, final_kkt=0.0,
            final_defect=0.0,
        )

    dominance = [r for i in range(6) for r in
                 (rec("a", i, 1.0), rec("b", i, 2.0))]
    profile = performance_profile(dominance, "walltime")
    i_one = int(np.searchsorted(profile.tau, 1.0))
    assert profile.tau[i_one] == 1.0
    assert profile.rho["a"][i_one] == 1.0
    assert profile.rho["b"][i_one] == 0.0

    mixed = dominance + [rec("a", 6, 1.0), rec("b", 6, 1.0, status="MaxIter")]
    profile = performance_profile(mixed, "walltime")
    for s in profile.solvers:
        assert np.all(np.diff(profile.rho[s]) >= 0.0)
    assert profile.rho["a"][-1] == 1.0
    assert profile.rho["b"][-1] == pytest.approx(6 / 7)
    assert profile.success_fraction("b") == pytest.approx(6 / 7)
