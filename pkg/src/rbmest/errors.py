"""Exception types shared across the package."""


class ParseError(ValueError):
    """Malformed input file; ``lineno`` is 1-based (0 when not line specific)."""

    def __init__(self, message: str, lineno: int = 0):
        super().__init__(message)
        self.lineno = lineno


class DimensionError(ValueError):
    """Qubit counts or bitstring lengths disagree."""


class CapacityError(ValueError):
    """Request exceeds an enumeration or dense-simulation cap."""


class DegenerateAmplitudeError(ArithmeticError):
    """A rotated amplitude vanished to within floating point."""


class NumericalError(ArithmeticError):
    """Non-finite values reached an optimizer or estimator."""
