"""Semantic exception hierarchy shared across the package."""


class SteinbenchError(Exception):
    """Base class for all package errors."""


class DomainError(SteinbenchError):
    """An argument lies outside the mathematically valid range."""


class InvalidDistributionError(SteinbenchError):
    """A distribution definition violates its structural invariants."""


class UnsupportedKernelError(SteinbenchError):
    """Stein-kernel based operation requested for a law without a density."""


class SingularKernelError(SteinbenchError):
    """The Stein kernel vanishes on an integration path."""


class NonConvergenceError(SteinbenchError):
    """A quadrature or series evaluation failed to reach tolerance."""


class InvalidMomentsError(SteinbenchError):
    """Moment inputs violate a necessary inequality (e.g. Jensen)."""


class CapacityError(SteinbenchError):
    """Requested tensor order or size exceeds the supported range."""


class PreconditionError(SteinbenchError):
    """An operation's stated precondition does not hold for the input."""


class DataError(SteinbenchError):
    """Input data (samples, CSV rows) are malformed or non-finite."""
