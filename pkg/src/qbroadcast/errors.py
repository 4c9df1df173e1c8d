"""Exception types raised by the toolkit.

Every error derives from :class:`QBroadcastError`, which itself is a
``ValueError`` so that callers validating user input can catch either.
"""


class QBroadcastError(ValueError):
    """Base class for all toolkit errors."""


class LabelCollision(QBroadcastError):
    """Two factors in a tensor product share a label."""


class LabelNotFound(QBroadcastError):
    """A requested subsystem label is not part of the factorization."""


class NotHermitian(QBroadcastError):
    """An operator expected to be Hermitian is not (within tolerance)."""


class NotPSD(QBroadcastError):
    """An operator expected to be positive semidefinite is not."""


class InvalidOrder(QBroadcastError):
    """A norm index or Renyi order lies outside its allowed range."""


class SpaceMismatch(QBroadcastError):
    """Two operators live on incompatible spaces."""


class SupportViolation(QBroadcastError):
    """The support condition ``supp rho <= supp sigma`` fails."""


class SupportWarning(UserWarning):
    """An operator leaks outside the support of a weight; value kept on support."""


class InvalidRank(QBroadcastError):
    """A requested rank is outside ``[1, dim]``."""


class DimensionTooSmall(QBroadcastError):
    """A target register is too small to hold the required support."""


class DimensionCapExceeded(QBroadcastError):
    """A construction would exceed the configured total-dimension cap."""


class IndexOutOfRange(QBroadcastError):
    """A copy index lies outside its count."""


class ShapeMismatch(QBroadcastError):
    """Array shapes do not agree (Kraus operators, rate vectors, ...)."""


class EmptySubset(QBroadcastError):
    """A nonempty subset of subsystems was required."""


class OptimizationBudgetExceeded(QBroadcastError):
    """An optimization problem is larger than the configured budget."""


class ConfigParseError(QBroadcastError):
    """A configuration file is malformed or contains invalid entries."""


class MissingSeed(QBroadcastError):
    """No seed was supplied to a randomized command."""


class NotTracePreserving(QBroadcastError):
    """Kraus operators do not satisfy ``sum K^dagger K = 1``."""


class IoError(QBroadcastError):
    """A report could not be written."""
