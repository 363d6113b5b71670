"""Exception hierarchy shared by every module."""


class SobGNNError(Exception):
    """Base class for all package errors."""


class DimensionError(SobGNNError, ValueError):
    """Operand shapes are incompatible."""


class DomainError(SobGNNError, ValueError):
    """Input lies outside the domain an operation is defined on."""


class ParameterError(SobGNNError, ValueError):
    """A configuration or hyperparameter value is invalid."""


class DataError(SobGNNError, ValueError):
    """Input files or arrays cannot be parsed or are inconsistent."""


class NumericalError(SobGNNError, ArithmeticError):
    """A computation produced non-finite or degenerate values."""


class IllConditionedError(NumericalError):
    """Smallest eigenvalue magnitude is too close to zero to invert."""


class DegenerateCascadeError(NumericalError):
    """A Hadamard power underflowed to an all-zero operator."""

    def __init__(self, rho: int, max_abs: float):
        self.rho = rho
        self.max_abs = max_abs
        super().__init__(
            f"cascade degenerate at rho={rho}: max |entry| = {max_abs:.3e} "
            "(edge weights underflow under this Hadamard power; lower alpha or raise eps)"
        )


class TestLeakageError(SobGNNError, RuntimeError):
    """The test mask was read inside a sealed (tuning/training) region."""

    __test__ = False  # keep pytest from collecting this as a test class


class SearchError(SobGNNError, RuntimeError):
    """Every trial of a hyperparameter search failed."""
