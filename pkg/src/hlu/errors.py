"""
Exception hierarchy and process exit codes.
"""

from enum import IntEnum


class ExitCode(IntEnum):
    """Process exit codes of the command-line harness."""

    SUCCESS = 0
    FAILURE = 1
    NOT_CONVERGED = 2


class HluError(Exception):
    """Base class for all solver errors."""


class ConfigError(HluError, ValueError):
    """Invalid configuration value."""


class DimensionError(HluError, ValueError):
    """Shape or length mismatch between operands."""


class MatrixMarketError(HluError):
    """Malformed or unsupported Matrix Market input."""


class TraceRefusedError(HluError):
    """Step tracing requested for an instance above the size limit."""


class SingularPivotError(HluError, ArithmeticError):
    """A pivot block is singular to working tolerance."""

    def __init__(self, node: str, level: int | None = None, detail: str = "") -> None:
        self.node = node
        self.level = level
        where = f"node {node}" if level is None else f"node {node} (level {level})"
        message = f"singular pivot block at {where}"
        if detail:
            message = f"{message}: {detail}"
        super().__init__(message)


class SvdConvergenceError(HluError, ArithmeticError):
    """The SVD did not converge with any LAPACK driver."""
