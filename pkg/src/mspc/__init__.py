"""Stochastic predictive control with state-space models and multi-step predictors."""

from . import errors, ident, linalg, ocp, solver, system, validate

__all__ = ["errors", "ident", "linalg", "ocp", "solver", "system", "validate"]
__version__ = "0.1.0"
