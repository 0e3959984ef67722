"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, ValidationFailure /
data errors -> 3, numerical failures -> 4.
"""


class FamlvmError(Exception):
    """Base class for all package errors."""


class ConfigError(FamlvmError):
    """Malformed configuration, unknown scenario, bad grid, etc."""


class ValidationFailure(FamlvmError):
    """Dataset failed validation and the caller required a valid one."""


class DimensionMismatch(FamlvmError):
    """Array shapes inconsistent with the declared model dimensions."""


class AllMissingSeries(FamlvmError):
    """An individual has no observed value for some phenotype."""


class NotPositiveDefinite(FamlvmError):
    """A covariance matrix failed its Cholesky factorization."""


class DfTooSmall(FamlvmError):
    """Inverse-Wishart degrees of freedom not greater than dim - 1."""


class NumericalBreakdown(FamlvmError):
    """A full conditional became numerically degenerate during sampling."""

    def __init__(self, message, state_dump=None, iteration=None):
        super().__init__(message)
        self.state_dump = state_dump
        self.iteration = iteration


class SeriesTooShort(FamlvmError):
    """Chain too short for the requested diagnostic."""


class ConstantSeries(FamlvmError):
    """Zero-variance series has no autocorrelation."""


class NameMismatch(FamlvmError):
    """Replicate chains do not share a common parameter set."""


class IndicatorAbsent(FamlvmError):
    """Requested inclusion indicator was not sampled (spike-and-slab off)."""


class IoFailure(FamlvmError):
    """File could not be read or written."""
