"""Exception hierarchy shared by every module."""
from __future__ import annotations


class FPPError(Exception):
    """Base class for all package errors."""


class DomainError(FPPError, ValueError):
    """An argument is outside the domain of an operation."""


class FormatError(FPPError, ValueError):
    """A file or descriptor is malformed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ConfigError(FormatError):
    """An experiment or model configuration is invalid."""


class BudgetExceeded(FPPError, RuntimeError):
    """A search exhausted its relaxation or vertex budget."""

    def __init__(self, what: str, cap: int):
        self.cap = cap
        super().__init__(f"{what} exceeded the budget cap of {cap}")


class UnreachableError(FPPError, RuntimeError):
    """The target cannot be reached inside the query domain."""


class NumericError(FPPError, ArithmeticError):
    """An iterative computation failed to converge."""

    def __init__(self, message: str, residual: float):
        self.residual = residual
        super().__init__(f"{message} (residual {residual:.3e})")


class SamplingError(FPPError, RuntimeError):
    """A Markov trajectory hit an absorbing dead end."""
