"""Exception types shared across the package."""


class PtstlError(Exception):
    """Base class for all errors raised by this package."""


class BudgetError(PtstlError):
    """A configured size or search budget was exceeded."""


class ValidationError(PtstlError, ValueError):
    """Input data or configuration does not satisfy its contract."""


class ParseError(ValidationError):
    """Formula text could not be parsed.

    ``span`` is a ``(start, end)`` pair of offsets into the input text.
    """

    def __init__(self, message, span, text=None):
        self.span = span
        self.text = text
        super().__init__(f"{message} at {span[0]}:{span[1]}")
        self.message = message
