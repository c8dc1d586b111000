"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: data/format problems exit 2,
backend problems exit 3.
"""


class KgstoryError(Exception):
    """Base class for all package errors."""


class DataFormatError(KgstoryError):
    """A data file violates its line format."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ConfigError(KgstoryError):
    """A configuration artifact (template table, lexicon) is invalid."""


class BackendError(KgstoryError):
    """Base class for failures of an external model backend."""


class TransportError(BackendError):
    """Backend was unreachable or timed out; safe to retry."""


class ProtocolError(BackendError):
    """Backend replied with a body that does not match the wire contract."""
