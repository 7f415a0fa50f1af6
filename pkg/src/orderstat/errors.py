"""Exception types raised across the package."""


class OrderStatError(Exception):
    """Base class for all package errors."""


class DomainError(OrderStatError, ValueError):
    """Invalid parameter or argument outside the domain of a function."""


class ModelError(OrderStatError, ValueError):
    """Inconsistent vector model (bad covariance, wrong marginal count, ...)."""


class CapabilityError(OrderStatError):
    """The requested quantity is not expressible for this model.

    Callers are expected to fall back to empirical estimation.
    """


class EstimationError(OrderStatError):
    """Monte Carlo estimation refused or statistically meaningless."""


class ConfigError(OrderStatError, ValueError):
    """Malformed model, grid or run configuration."""
