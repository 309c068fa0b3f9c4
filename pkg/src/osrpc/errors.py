"""Exception hierarchy shared by the sampler, data layer and CLI."""


class OsrpcError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(OsrpcError, ValueError):
    """A distribution or model parameter is outside its valid domain."""


class DataParseError(OsrpcError, ValueError):
    """Input data could not be parsed or failed validation.

    ``row`` and ``column`` locate the offending cell when known (row numbers
    are 1-based and count the header as row 1).
    """

    def __init__(self, message, row=None, column=None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column!r}")
        if loc:
            message = f"{message} ({', '.join(loc)})"
        super().__init__(message)
        self.row = row
        self.column = column


class NumericalError(OsrpcError, ArithmeticError):
    """A computation produced a non-finite or degenerate value."""


class NumericalUnderflowError(NumericalError):
    """A truncation interval carries (numerically) no probability mass."""


class DecompositionError(NumericalError):
    """A matrix factorisation failed (matrix not positive definite)."""


class InvalidStateError(OsrpcError, ValueError):
    """A sampler state or call sequence is inconsistent."""


class DegenerateFitError(OsrpcError):
    """Cluster pruning left nothing to fit."""
