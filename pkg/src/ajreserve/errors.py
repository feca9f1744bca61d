"""Exception hierarchy shared across the package.

The CLI maps these onto distinct exit codes (see cli.EXIT_CODES).
"""


class AjReserveError(Exception):
    """Base class for all package errors."""


class ParseError(AjReserveError):
    """Malformed input row; carries the offending row number when known."""

    def __init__(self, message, row=None):
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)
        self.row = row


class ValidationError(AjReserveError):
    """Domain invariant violated by otherwise well-formed input."""


class NumericError(AjReserveError):
    """Numerical guard tripped (zero denominators, invalid factors, ...)."""


class NoLocalDataError(NumericError):
    """Kernel density is zero at the requested covariate point."""

    def __init__(self, x):
        super().__init__(f"no local data around covariate point {tuple(x)}")
        self.x = tuple(x)


class BeyondSupportError(NumericError):
    """Conditioning level lies at or beyond the top of the estimated support."""
