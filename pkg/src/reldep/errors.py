"""Exception types shared across the package."""


class RelDepError(Exception):
    """Base class for all package errors."""


class DomainError(RelDepError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class UndefinedValueError(RelDepError, ArithmeticError):
    """The requested quantity is undefined (zero density, zero mass, ...)."""


class ConvergenceError(RelDepError, RuntimeError):
    """An iterative procedure did not reach its tolerance.

    The ``residual`` attribute carries the last residual reached.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class UnsupportedFamilyError(RelDepError, TypeError):
    """The operation is not available for the given copula family."""


class BlockError(RelDepError, ArithmeticError):
    """No admissible update exists for a 2x2 checkerboard block."""

    def __init__(self, message, block=None):
        super().__init__(message)
        self.block = block
