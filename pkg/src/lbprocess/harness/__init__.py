"""Simulation, diagnostics, configuration and the command-line tools."""

from .diagnostics import crps_empirical, density_and_regression_errors, ess_multivariate, ess_univariate
from .scenarios import DataError, ScenarioSpec, simulate

__all__ = [
    "DataError",
    "ScenarioSpec",
    "simulate",
    "ess_univariate",
    "ess_multivariate",
    "crps_empirical",
    "density_and_regression_errors",
]
