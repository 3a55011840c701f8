"""Exception hierarchy.

Two families matter to callers: ``DomainError`` for inputs that make no
physical sense, and ``NumericError`` for computations that could not reach
their tolerance.  The CLI maps them to exit codes 1 and 2.
"""

from __future__ import annotations


class FermiCavityError(Exception):
    """Base class for all package errors."""


class DomainError(FermiCavityError, ValueError):
    """Input outside the domain of the requested quantity."""


class InfeasibleError(DomainError):
    """Constraints cannot be satisfied (e.g. energy below the Pauli minimum)."""


class UnsupportedError(DomainError):
    """Requested variant is not implemented (dimension, mask shape, ...)."""


class NumericError(FermiCavityError, ArithmeticError):
    """A numerical procedure failed to meet its tolerance.

    Attributes
    ----------
    estimate : float or None
        Best available estimate at the time of failure.
    error_bound : float or None
        Error bound associated with ``estimate``.
    """

    def __init__(self, message, estimate=None, error_bound=None):
        super().__init__(message)
        self.estimate = estimate
        self.error_bound = error_bound


class SpectralIntegrityError(NumericError):
    """Correlation-matrix eigenvalues strayed too far outside [0, 1]."""


class BoundaryProximityWarning(UserWarning):
    """Points or sites sit closer to the cavity wall than the configured margin."""


class FitError(NumericError):
    """A least-squares fit had nothing to fit or did not converge."""
