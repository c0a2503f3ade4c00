"""Exception classes shared by all modules.

The CLI maps each class to an exit code (see EXIT_CODES).
"""

from __future__ import annotations


class TransportError(Exception):
    """Base class for all fdtransport errors."""


class ConfigError(TransportError, ValueError):
    """Invalid configuration or scheme parameters."""


class DataError(TransportError, ValueError):
    """Invalid input data (non-finite samples, malformed files)."""


class PreconditionError(TransportError, ValueError):
    """An operation was called with inputs violating its precondition."""


class DomainError(TransportError, ValueError):
    """Empty or malformed discrete domain, or a trajectory leaving it."""


class SolverError(TransportError, RuntimeError):
    """A linear solver failed to reach its tolerance."""

    def __init__(self, message: str, residual: float | None = None, iterations: int | None = None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations


class DegenerateGeometryError(TransportError, ArithmeticError):
    """Interface points with vanishing discrete gradient."""

    def __init__(self, message: str, points: list[tuple[int, int, int]] | None = None):
        super().__init__(message)
        self.points = points or []


class SchemeInvariantError(TransportError, RuntimeError):
    """An invariant guaranteed by construction failed (indicates a bug)."""


EXIT_CODES: dict[type[TransportError], int] = {
    ConfigError: 2,
    DataError: 2,
    PreconditionError: 2,
    DomainError: 2,
    SolverError: 3,
    SchemeInvariantError: 3,
    DegenerateGeometryError: 4,
}


def exit_code_for(exc: BaseException) -> int:
    """Return the CLI exit code for an exception (1 for unknown failures)."""
    for cls in type(exc).__mro__:
        if cls in EXIT_CODES:
            return EXIT_CODES[cls]
    return 1
