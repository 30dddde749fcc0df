"""Exception types shared across the toolkit."""


class TurboI2IError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(TurboI2IError, ValueError):
    """Tensor shape violates a contract (dims, divisibility, mismatch)."""


class ValidationError(TurboI2IError, ValueError):
    """Input value violates a contract (range, finiteness, missing data)."""


class NumericalError(TurboI2IError, ArithmeticError):
    """A numerical routine left its tolerated regime (e.g. matrix sqrt)."""
