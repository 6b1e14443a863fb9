"""Exception types shared across the package."""


class AdaBoxError(Exception):
    """Base class for all package errors."""


class InvalidInput(AdaBoxError, ValueError):
    """Raised when an argument violates an operation's preconditions."""


class ParseError(InvalidInput):
    """Raised when a CSV file cannot be parsed.

    ``row`` is the 1-based line number of the offending row.
    """

    def __init__(self, message, row=None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class Diverged(AdaBoxError, RuntimeError):
    """Raised when region growing exceeds its iteration bound."""
