"""Exception hierarchy shared by every stage of the generator."""

from __future__ import annotations


class CcaError(Exception):
    """Base class for all generator errors."""


class ModelError(CcaError, ValueError):
    """A model document could not be parsed or failed validation."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f" (line {line}" + (f", column {column}" if column is not None else "") + ")"
        super().__init__(message + where)


class UnsatisfiableModel(CcaError):
    """The constraint set forbids every full assignment."""

    def __init__(self, message: str, parameter: int | None = None):
        self.parameter = parameter
        super().__init__(message)


class ResourceLimit(CcaError):
    """A configured size cap was exceeded."""


class RetryExhausted(CcaError):
    """Random row generation gave up after the retry cap."""


class RowBudgetExceeded(ResourceLimit):
    """The search reached ``max_rows`` without covering every valid tuple."""
