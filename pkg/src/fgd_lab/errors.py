"""Shared exception and warning types."""


class DimensionMismatch(ValueError):
    """Operands have incompatible dimensions."""


class NotPositiveDefinite(ValueError):
    """A matrix that must be symmetric positive definite is not."""


class NonFiniteIterate(ArithmeticError):
    """An optimizer iterate produced a NaN or infinite coordinate.

    Attributes:
        step: 1-based index of the update that first went non-finite.
    """

    def __init__(self, step: int, message: str | None = None):
        self.step = step
        super().__init__(message or f"non-finite iterate at step {step}")


class InvalidA(ValueError):
    """The decay constant a is outside the range a use case requires."""


class InvalidDimension(ValueError):
    """The problem dimension is outside the range a use case requires."""


class ConfigError(ValueError):
    """Invalid experiment, schedule, or CLI configuration."""


class SymmetryLossWarning(UserWarning):
    """The covariance recursion output drifted measurably from symmetric."""
