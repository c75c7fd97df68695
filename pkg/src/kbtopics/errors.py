"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError (and
subclasses) -> 2, anything else -> 3.
"""


class KbTopicsError(Exception):
    """Base class for all package errors."""


class ConfigError(KbTopicsError):
    """Invalid or inconsistent configuration."""


class DataError(KbTopicsError):
    """Problems with user-supplied data files."""


class TripleParseError(DataError):
    """Malformed triple line; carries the offending location."""

    def __init__(self, message: str, path: str = "", line: int = 0):
        if path:
            message = f"{path}:{line}: {message}"
        super().__init__(message)
        self.path = path
        self.line = line


class IndexFormatError(DataError):
    """Index directory is missing, corrupt, or has a mismatched version."""


class IndexIntegrityError(DataError):
    """Stored index data fails an internal consistency check."""


class PipelineError(KbTopicsError):
    """Internal failure in a processing stage."""
