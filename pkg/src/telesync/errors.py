"""Exception types shared across the package."""


class TelesyncError(Exception):
    """Base class for all package errors."""


class InputError(TelesyncError, ValueError):
    """Rejected input: bad dimensions, out-of-range values, invalid arguments."""


class FileFormatError(TelesyncError, ValueError):
    """A config or data file failed to parse.

    Carries the offending path and 1-based line number so errors are
    actionable from the command line.
    """

    def __init__(self, path, line, message):
        self.path = str(path)
        self.line = line
        super().__init__(f"{self.path}:{line}: {message}")
