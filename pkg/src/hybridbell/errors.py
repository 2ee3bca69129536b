"""Exception types shared across the package."""


class HybridBellError(Exception):
    """Base class for all errors raised by hybridbell."""


class InvalidArgumentError(HybridBellError, ValueError):
    pass


class DegenerateInputError(HybridBellError, ValueError):
    """Input is valid but sits where the requested quantity is undefined
    (zero-norm bundle, product state asked for a stripping angle, ...)."""


class NumericalValidationError(HybridBellError, ArithmeticError):
    """A computed result failed a postcondition check."""
