"""
Error types for RoseSpec

Learning Notes:
- One small hierarchy rooted at RoseSpecError so the CLI can map failures
  onto stable exit codes
- Argument errors also derive from ValueError, numerical failures from
  ArithmeticError, so callers that only know the builtins still catch them
"""

from typing import Any, Dict, Optional


class RoseSpecError(Exception):
    """Base class for every error raised by this package."""


class InvalidArgumentError(RoseSpecError, ValueError):
    """A caller passed a count, range or ensemble the operation cannot accept."""


class PoleProximityError(InvalidArgumentError):
    """A secular function was evaluated on (or numerically at) one of its poles."""

    def __init__(self, k: float, bond_index: int, message: Optional[str] = None):
        self.k = k
        self.bond_index = bond_index
        super().__init__(message or f"k={k!r} lies on a pole of bond {bond_index}")


class InvalidConfigurationError(InvalidArgumentError):
    """A spin configuration contains w_b = +-id (theta_b in {0, pi})."""


class OutOfDomainError(InvalidArgumentError):
    """An asymptotic formula was requested outside its range of validity."""


class NumericalFailureError(RoseSpecError, ArithmeticError):
    """A series, quadrature or iteration failed to converge."""

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        self.diagnostics = diagnostics or {}
        super().__init__(message)


class UsageError(RoseSpecError):
    """The experiment configuration is invalid."""


class DataFileError(RoseSpecError, OSError):
    """Reading or writing a data file failed."""

    def __init__(self, path: Any, reason: str):
        self.path = str(path)
        super().__init__(f"{self.path}: {reason}")


EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4


def exit_code_for(error: BaseException) -> int:
    """Map an exception onto the CLI's exit code contract."""
    if isinstance(error, NumericalFailureError):
        return EXIT_NUMERICAL
    if isinstance(error, (UsageError, InvalidArgumentError)):
        return EXIT_USAGE
    if isinstance(error, (DataFileError, OSError)):
        return EXIT_IO
    return 1
