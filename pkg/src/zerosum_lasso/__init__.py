"""Zero-sum constrained lasso solver with active-set identification."""
from .core import (
    Problem,
    SolverConfig,
    SolverResult,
    SolverState,
    Status,
    Strategy,
    objective,
    problem_new,
    refresh_residual,
)
from .optimality import eta_bounds, full_gradient, kkt_check, lambda_max, multiplier
from .solver import solve

__all__ = [
    "Problem",
    "SolverConfig",
    "SolverResult",
    "SolverState",
    "Status",
    "Strategy",
    "eta_bounds",
    "full_gradient",
    "kkt_check",
    "lambda_max",
    "multiplier",
    "objective",
    "problem_new",
    "refresh_residual",
    "solve",
]

__version__ = "0.1.0"
