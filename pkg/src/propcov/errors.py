"""Exception types raised by propcov."""


class PropCovError(Exception):
    """Base class for all propcov errors."""


class DimensionMismatch(PropCovError, ValueError):
    pass


class NotPositiveDefinite(PropCovError, ValueError):
    pass


class NotPositiveSemidefinite(PropCovError, ValueError):
    pass


class SingularMatrix(PropCovError, ValueError):
    pass


class KTooSmall(PropCovError, ValueError):
    """Raised when an operation needs at least two groups."""


class NotConverged(PropCovError, RuntimeError):
    pass


class InvalidArgument(PropCovError, ValueError):
    pass


class StepTooLarge(PropCovError, ArithmeticError):
    """Finite-difference step produced an inconsistent derivative estimate."""
