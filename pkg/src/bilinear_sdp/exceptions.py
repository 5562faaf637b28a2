"""Exception hierarchy shared by every module."""


class BilinearSDPError(Exception):
    """Base class for all package errors."""


class InvalidInputError(BilinearSDPError, ValueError):
    """Raised when arguments have the wrong shape, sign or domain."""


class NumericFailure(BilinearSDPError, ArithmeticError):
    """Raised when an iterative routine fails to converge."""


class FactorizationError(NumericFailure):
    """Raised when a matrix expected to be positive definite is not."""


class SingularControlError(BilinearSDPError):
    """Raised when a physical control cannot realize the requested phase rate."""
