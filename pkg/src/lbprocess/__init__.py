"""Logistic-beta processes: samplers, binary regression and dependent mixtures."""

from . import binary_regression, ddp_mixture, kernels, logistic_beta, polya, special_math

__version__ = "0.1.0"

__all__ = ["binary_regression", "ddp_mixture", "kernels", "logistic_beta", "polya", "special_math", "__version__"]
