"""Exception types shared across the package."""

from __future__ import annotations


class NnctError(Exception):
    """Base class for errors raised by this package."""


class PointParseError(NnctError):
    """A point file could not be parsed.

    Carries the 1-based line number of the offending row when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ValidationError(NnctError):
    """Input data violates a structural requirement."""


class DegenerateStatisticError(NnctError):
    """A test statistic is undefined (zero variance or empty class)."""


class ConsistencyError(NnctError):
    """An internal numerical consistency check failed."""
