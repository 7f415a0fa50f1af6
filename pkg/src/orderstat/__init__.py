"""Thresholds, Monte Carlo estimators and bound checks for order statistics of random vectors."""

from .errors import CapabilityError, ConfigError, DomainError, EstimationError, ModelError, OrderStatError
from .marginals import Gaussian, Laplace, Marginal, ShiftedExponential, Uniform
from .models import (
    Decoupled,
    FullyCorrelatedGaussian,
    GaussianCovariance,
    IndependentProduct,
    SignSharedGaussian,
    UniformCube,
    VectorModel,
    model_from_config,
)
from .montecarlo import estimate_mean, estimate_means, kmax, kmin, topk_sum
from .reports import BoundReport, Estimate
from .thresholds import t_threshold, tstar_threshold

__version__ = "0.1.0"

__all__ = [
    "BoundReport", "CapabilityError", "ConfigError", "Decoupled", "DomainError", "Estimate",
    "EstimationError", "FullyCorrelatedGaussian", "Gaussian", "GaussianCovariance", "IndependentProduct",
    "Laplace", "Marginal", "ModelError", "OrderStatError", "ShiftedExponential", "SignSharedGaussian",
    "Uniform", "UniformCube", "VectorModel", "estimate_mean", "estimate_means", "kmax", "kmin",
    "model_from_config", "t_threshold", "topk_sum", "tstar_threshold",
]
