"""First passage percolation on Cayley graphs of hyperbolic groups."""
from __future__ import annotations

__version__ = "0.1.0"

from .errors import (BudgetExceeded, ConfigError, DomainError, FormatError, FPPError,  # noqa: E402
                     NumericError, SamplingError, UnreachableError)
