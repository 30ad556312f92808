"""Exception hierarchy shared by all monoplan modules."""


class MonoplanError(Exception):
    """Base class for every error raised by monoplan."""


class DomainError(MonoplanError, ValueError):
    """Input lies outside the domain of an operation."""


class SizeError(DomainError):
    """Instance too large for an exact (oracle) solver."""


class BaseMismatchError(DomainError):
    """Two plans were expected to share the same first marginal."""


class UnsupportedCombinationError(DomainError):
    """A pair of fiber kinds cannot be coupled in the requested way."""


class NotMonotoneError(DomainError):
    """A plan whose support is not monotone was passed where one is required.

    The violating pair of support points is kept on ``witness``.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class NumericError(MonoplanError, ArithmeticError):
    """An iterative method failed to converge."""
