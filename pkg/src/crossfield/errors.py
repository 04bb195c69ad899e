"""Exception types shared across the package.

The CLI maps these onto exit codes: ``DataError`` -> 1, ``ParameterError`` -> 2,
``NumericalError`` -> 3.
"""


class CrossfieldError(Exception):
    """Base class for all package errors."""


class ParameterError(CrossfieldError, ValueError):
    """A parameter lies outside its domain or a model is not valid."""


class DataError(CrossfieldError):
    """Malformed input data or configuration documents."""


class NumericalError(CrossfieldError, ArithmeticError):
    """A numerical procedure (factorization, optimization) failed."""


class IndefiniteMatrixError(NumericalError):
    """Cholesky factorization failed even after the full jitter escalation."""

    def __init__(self, message, pivot=None):
        super().__init__(message)
        self.pivot = pivot
