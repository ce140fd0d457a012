"""Exception types raised across the package.

All of them subclass :class:`ValueError`, so callers that only care about
"bad input" can catch that.
"""


class SublooError(ValueError):
    """Base class for package errors."""


class MalformedInputError(SublooError):
    """A draws file could not be parsed."""


class ValidationError(SublooError):
    """Input parsed fine but violates a data invariant (NaN, -inf, shape)."""


class InsufficientTailError(SublooError):
    """Fewer than 5 exceedances were handed to the GPD fit."""


class DegenerateTailError(SublooError):
    """The tail sample has zero variance, so no GPD can be fitted."""


class InsufficientDrawsError(SublooError):
    """Too few draws for Pareto smoothing."""


class ConfigurationError(SublooError):
    """A sampling strategy is missing the inputs it needs."""


class DegreesOfFreedomError(SublooError):
    """A variance estimator was called with fewer than two subsampled values."""
