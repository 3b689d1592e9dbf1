"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class QedError(Exception):
    """Base class for all package errors."""


class DomainError(QedError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(QedError, ValueError):
    """Invalid numerical configuration (step sizes, path counts, grids)."""


class DataError(QedError):
    """Malformed or inconsistent input data."""


class NoBarrierError(DomainError):
    """The parameters do not produce a metastable well with a barrier.

    Attributes
    ----------
    discriminant : float
        Value of ``kappa**2 + 4*g*theta_bar`` at the offending parameters.
    """

    def __init__(self, message: str, discriminant: float):
        super().__init__(message)
        self.discriminant = discriminant


class SingularityError(DomainError):
    """Evaluation at or beyond a finite-time blow-up."""

    def __init__(self, message: str, t_blowup: float):
        super().__init__(message)
        self.t_blowup = t_blowup


class InconclusiveError(QedError):
    """A Monte Carlo estimate saw no events within its horizon."""

    def __init__(self, message: str, t_max: float):
        super().__init__(message)
        self.t_max = t_max


class NumericError(QedError, ArithmeticError):
    """A numerical routine failed to converge.

    Attributes
    ----------
    diagnostics : dict
        Routine-specific details (iterations, residuals, error estimates).
    """

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
