"""Round-robin sparsification of multivariable feedback for control-affine systems."""

from rrsim.errors import (
    AnalysisError,
    BlowupError,
    ConfigurationError,
    DomainError,
    IntegrityError,
    RRSimError,
    SynthesisError,
)
from rrsim.dynamics import (
    ControlAffineSystem,
    Kernel,
    closed_loop_jacobian,
    eval_nominal_rhs,
    eval_switched_rhs,
    validate_premise,
)
from rrsim.scheduling import (
    ConstantSchedule,
    PiecewiseSchedule,
    active_index,
    active_index_tv,
    dominates,
    next_switch_time,
)
from rrsim.integrator import IntegratorConfig, Trajectory, convergence_order, integrate

__all__ = [
    "AnalysisError",
    "BlowupError",
    "ConfigurationError",
    "ConstantSchedule",
    "ControlAffineSystem",
    "DomainError",
    "IntegratorConfig",
    "IntegrityError",
    "Kernel",
    "PiecewiseSchedule",
    "RRSimError",
    "SynthesisError",
    "Trajectory",
    "active_index",
    "active_index_tv",
    "closed_loop_jacobian",
    "convergence_order",
    "dominates",
    "eval_nominal_rhs",
    "eval_switched_rhs",
    "integrate",
    "next_switch_time",
    "validate_premise",
]
