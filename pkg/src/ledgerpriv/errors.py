"""Exception hierarchy shared by every stage of the pipeline."""


class LedgerPrivError(Exception):
    """Base class for all package errors."""


class ConfigError(LedgerPrivError, ValueError):
    """Invalid parameters, unknown device types, missing assignments."""


class DataError(LedgerPrivError, ValueError):
    """Input data is malformed or inconsistent."""


class ParseError(DataError):
    """A text input could not be parsed.

    ``line`` is the 1-based line number of the offending row when known.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DomainError(LedgerPrivError, ValueError):
    """An operation was called outside its mathematical domain."""
