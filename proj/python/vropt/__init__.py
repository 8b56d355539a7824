"""Variance-reduced finite-sum solvers for regularized GLMs."""

from ._vropt import (
    ConfigError,
    Dataset,
    DimensionError,
    DivergenceError,
    NonSmoothLossError,
    Objective,
    ParseError,
    ReferenceSolution,
    Smoothness,
    check_ids,
    fit_linear_rate,
    load_dataset,
    methods,
    run,
    solve_reference,
    validate,
)

__all__ = [
    "ConfigError",
    "Dataset",
    "DimensionError",
    "DivergenceError",
    "NonSmoothLossError",
    "Objective",
    "ParseError",
    "ReferenceSolution",
    "Smoothness",
    "check_ids",
    "fit_linear_rate",
    "load_dataset",
    "methods",
    "run",
    "solve_reference",
    "validate",
]
