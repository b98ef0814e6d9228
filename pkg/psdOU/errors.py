"""
Exception hierarchy for psdOU.

Every error raised on purpose by the library derives from PsdOUError, and most
also derive from the builtin the caller would naturally expect (ValueError for
bad input, ArithmeticError for numerical breakdown).
"""

from typing import Optional


class PsdOUError(Exception):
    """Base class of all psdOU errors."""


class DimensionError(PsdOUError, ValueError):
    """Shapes or dimensions do not match, or a matrix is not symmetric."""


class NotPositiveSemidefiniteError(PsdOUError, ValueError):
    """A matrix required to be positive semidefinite is not."""

    def __init__(self, message: str, eig_floor: Optional[float] = None) -> None:
        super().__init__(message)
        self.eig_floor = eig_floor


class NotDoublyNonnegativeError(PsdOUError, ValueError):
    """A matrix handed to cp_factorize is not doubly nonnegative."""


class SingularOperatorError(PsdOUError, ArithmeticError):
    """The drift operator (or its big counterpart) cannot be inverted reliably."""


class UnstableDriftError(PsdOUError, ValueError):
    """A stationary quantity was requested for a drift with max Re σ(A) >= 0."""


class BranchCutError(PsdOUError, ArithmeticError):
    """Principal matrix logarithm undefined: spectrum touches (-inf, 0]."""


class UnsupportedModelError(PsdOUError, NotImplementedError):
    """The requested sampler or closed form is not available for this model."""


class NumericalError(PsdOUError, ArithmeticError):
    """Non-finite values or a numerical procedure that did not converge."""


class QuadratureError(NumericalError):
    """Adaptive quadrature stopped before reaching the requested tolerance."""

    def __init__(self, message: str, achieved: float) -> None:
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class ConfigError(PsdOUError, ValueError):
    """An experiment configuration violates the schema."""


class ValidationFailure(PsdOUError):
    """An acceptance suite finished with at least one failed check."""


class ParameterError(PsdOUError, ValueError):
    """A model parameter is outside its admissible range."""
