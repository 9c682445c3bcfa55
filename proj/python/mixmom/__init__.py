"""Moment estimators for mixtures of binary regressions with Gaussian covariates."""

from ._core import (
    NumericalError,
    Parameters,
    builtin_experiment,
    empirical_moments,
    generate,
    init_directions,
    m3ls,
    summed_errors,
    theoretical_moments,
)

__all__ = [
    "NumericalError",
    "Parameters",
    "builtin_experiment",
    "empirical_moments",
    "generate",
    "init_directions",
    "m3ls",
    "summed_errors",
    "theoretical_moments",
]
