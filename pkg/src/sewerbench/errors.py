"""Exception taxonomy shared across the package.

CLI exit codes map onto these: ConfigError/DataFormatError -> 2 (data error),
FitError -> 3 (classifier failure), argparse usage problems -> 1.
"""


class SewerbenchError(Exception):
    """Base class for all package errors."""


class ConfigError(SewerbenchError):
    """Invalid configuration (bad grids, specs, parameters)."""


class DataFormatError(SewerbenchError):
    """Malformed data file; carries a 1-based line number when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FitError(SewerbenchError):
    """A classifier failed to train (non-finite loss, exhausted retries)."""
