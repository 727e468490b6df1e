"""Exception hierarchy shared by every nrisk module."""

from __future__ import annotations


class NriskError(Exception):
    """Base class for domain errors. The CLI maps these to exit code 1."""


class ParseError(NriskError):
    """A document could not be parsed. Carries the offending line and field when known."""

    def __init__(self, message: str, line: int | None = None, field: str | None = None):
        self.line = line
        self.field = field
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field is not None:
            where.append(f"field {field!r}")
        prefix = ", ".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ValidationError(NriskError):
    pass


class SiteNotFoundError(NriskError):
    pass


class OutOfRangeError(NriskError, ValueError):
    pass


class ModelValidityError(NriskError, ValueError):
    """The linear barometric model is asked for something outside its validity."""


class FitError(NriskError):
    pass


class TransportError(NriskError):
    pass


class PayloadError(NriskError):
    pass
