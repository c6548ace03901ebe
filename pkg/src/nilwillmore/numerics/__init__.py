"""Shared numerical kernels: quadrature, ODE integration, finite differences."""

from .differences import (
    CancellationError,
    cumulative_integral,
    fd_weights,
    finite_difference,
    grid_derivative,
    sample_derivative,
)
from .ode import (
    Event,
    OdeError,
    OdeState,
    StepBudgetExhausted,
    StepSizeUnderflow,
    Trajectory,
    ode_solve,
)
from .quadrature import (
    QuadratureError,
    QuadratureResult,
    integrate_interval,
    integrate_semi_infinite,
)

__all__ = [
    "CancellationError", "cumulative_integral", "fd_weights", "finite_difference",
    "grid_derivative", "sample_derivative", "Event", "OdeError", "OdeState",
    "StepBudgetExhausted", "StepSizeUnderflow", "Trajectory", "ode_solve",
    "QuadratureError", "QuadratureResult", "integrate_interval", "integrate_semi_infinite",
]
