"""Actuator shape and control co-optimization for a semilinear beam model."""

from .adjoint import (
    AdjointTrajectory,
    Gradient,
    KKTResidual,
    adjoint_solve,
    adjoint_sweep,
    gradient_control,
    gradient_shape,
    kkt_residuals,
)
from .config import GradCheckOptions, RunConfig, SweepOptions, parse_config
from .forward import (
    ControlSignal,
    NewtonDivergenceError,
    TimeGrid,
    Trajectory,
    evaluate_cost,
    forward_solve,
    step,
    tangent_linear_solve,
)
from .model import (
    ConfigError,
    DiscreteModel,
    ModelConfig,
    ShapeBoundsError,
    ShapeParams,
    StateVector,
    build_model,
    energy_norm_sq,
    eval_shape,
    nonlinear_jacobian_apply,
    nonlinear_term,
    shape_modal_jacobian,
    shape_modal_load,
    state_from_physical,
    state_to_physical,
)
from .optimize import (
    AdmissibleSets,
    OptimConfig,
    OptimResult,
    optimize,
    project_control,
    project_shape,
)
from .oracles import (
    GradCheckReport,
    SweepResult,
    analytic_linear_solution,
    duality_probe,
    fd_gradient,
    grad_check,
    sweep_shape,
)

__version__ = "0.1.0"

__all__ = [
    "AdjointTrajectory",
    "AdmissibleSets",
    "ConfigError",
    "ControlSignal",
    "DiscreteModel",
    "GradCheckOptions",
    "GradCheckReport",
    "Gradient",
    "KKTResidual",
    "ModelConfig",
    "NewtonDivergenceError",
    "OptimConfig",
    "OptimResult",
    "RunConfig",
    "ShapeBoundsError",
    "ShapeParams",
    "StateVector",
    "SweepOptions",
    "SweepResult",
    "TimeGrid",
    "Trajectory",
    "adjoint_solve",
    "adjoint_sweep",
    "analytic_linear_solution",
    "build_model",
    "duality_probe",
    "energy_norm_sq",
    "eval_shape",
    "evaluate_cost",
    "fd_gradient",
    "forward_solve",
    "grad_check",
    "gradient_control",
    "gradient_shape",
    "kkt_residuals",
    "nonlinear_jacobian_apply",
    "nonlinear_term",
    "optimize",
    "parse_config",
    "project_control",
    "project_shape",
    "shape_modal_jacobian",
    "shape_modal_load",
    "state_from_physical",
    "state_to_physical",
    "step",
    "sweep_shape",
    "tangent_linear_solve",
]
