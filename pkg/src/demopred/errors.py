"""Exception types shared across the pipeline."""

from __future__ import annotations


class DemopredError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(DemopredError, ValueError):
    """Input data or parameters violate a documented contract."""


class ParseError(ValidationError):
    """A line of an input file could not be parsed."""

    def __init__(self, message: str, lineno: int | None = None, path: str | None = None):
        self.lineno = lineno
        self.path = path
        where = ""
        if path is not None:
            where = f"{path}:"
        if lineno is not None:
            where = f"{where}{lineno}: "
        elif where:
            where += " "
        super().__init__(f"{where}{message}")
