"""Exception hierarchy shared by every module."""


class RelpovError(Exception):
    """Base class for all package errors."""


class DomainError(RelpovError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class ParameterError(DomainError):
    """Invalid distribution or configuration parameters."""


class UnsupportedMethodError(RelpovError):
    """The requested method cannot be applied to the supplied data."""


class FitError(RelpovError):
    """No acceptable fit was found.

    ``diagnostics`` carries whatever the optimiser learned about the best
    rejected candidate.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class InfeasibleTransferError(DomainError):
    """The transfer plan would need a tax rate of 100% or more."""


class IngestError(RelpovError):
    """Malformed input file. ``rows`` lists the offending 1-based row numbers."""

    def __init__(self, message, rows=()):
        super().__init__(message)
        self.rows = list(rows)
