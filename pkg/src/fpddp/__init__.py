"""Feasibility-projection DDP for trajectory generation, with shooting baselines."""

from .baselines import DmsSettings, solve_dms, solve_dss
from .bench import (
    ProfileResult,
    RunConfig,
    RunRecord,
    performance_profile,
    run_single,
    run_sweep,
)
from .integrators import Rk4Integrator, rk4_step, rk4_step_with_sensitivity
from .models import (
    MODEL_BUILDERS,
    LqrInitializationError,
    cart_pendulum_model,
    chen_allgoewer_model,
    constant_guess,
    default_guess,
    lqr_initial_guess,
    make_model,
)
from .ocp import (
    EvaluationError,
    FeasibilityOcp,
    ModelDimensionError,
    OcpModel,
    QpData,
    Trajectory,
    ViolationReport,
    build_feasibility_problem,
    dynamics_defect,
    eval_objective,
    eval_stage_data,
    violation_report,
)
from .riccati import (
    BackwardPass,
    NotPositiveDefiniteError,
    QpOracleError,
    backward_sweep,
    dense_qp_oracle,
    linear_rollout,
    qp_optimal_objective,
    qp_optimal_objective_dual,
)
from .solver import (
    IterateRecord,
    LineSearchFailedError,
    RegState,
    RegularizationOverflowError,
    RolloutDivergedError,
    SolveResult,
    SolveStatus,
    SolverSettings,
    StepOutcome,
    armijo_search,
    control_gradient,
    make_dynamically_feasible,
    nonlinear_rollout,
    rollout_controls,
    solve,
    update_regularization,
)

__all__ = [
    "BackwardPass",
    "DmsSettings",
    "EvaluationError",
    "FeasibilityOcp",
    "IterateRecord",
    "LineSearchFailedError",
    "LqrInitializationError",
    "MODEL_BUILDERS",
    "ModelDimensionError",
    "NotPositiveDefiniteError",
    "OcpModel",
    "ProfileResult",
    "QpData",
    "QpOracleError",
    "RegState",
    "RegularizationOverflowError",
    "Rk4Integrator",
    "RolloutDivergedError",
    "RunConfig",
    "RunRecord",
    "SolveResult",
    "SolveStatus",
    "SolverSettings",
    "StepOutcome",
    "Trajectory",
    "ViolationReport",
    "armijo_search",
    "backward_sweep",
    "build_feasibility_problem",
    "cart_pendulum_model",
    "chen_allgoewer_model",
    "constant_guess",
    "control_gradient",
    "default_guess",
    "dense_qp_oracle",
    "dynamics_defect",
    "eval_objective",
    "eval_stage_data",
    "linear_rollout",
    "lqr_initial_guess",
    "make_dynamically_feasible",
    "make_model",
    "nonlinear_rollout",
    "performance_profile",
    "qp_optimal_objective",
    "qp_optimal_objective_dual",
    "rk4_step",
    "rk4_step_with_sensitivity",
    "rollout_controls",
    "run_single",
    "run_sweep",
    "solve",
    "solve_dms",
    "solve_dss",
    "update_regularization",
    "violation_report",
]
