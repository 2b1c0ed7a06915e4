"""Sparse interaction estimation for quadratic regression.

The interaction matrix is found by an l1-penalized moment criterion solved
with ADMM, then refit by least squares on the selected support.
"""

__version__ = "0.1.0"

from .admm import InteractionFit, SolverOptions, solve_pie
from .moments import CenteredStats, Dataset, center, lambda_r, lambda_y
from .tuning import PathResult, PIEOptions, QuadraticModel, fit_pier, fit_piey

__all__ = [
    "CenteredStats",
    "Dataset",
    "InteractionFit",
    "PIEOptions",
    "PathResult",
    "QuadraticModel",
    "SolverOptions",
    "center",
    "fit_pier",
    "fit_piey",
    "lambda_r",
    "lambda_y",
    "solve_pie",
]
