"""Exception types shared across the package.

The CLI maps these onto exit codes: ValidationError (and subclasses) exit 1,
FormatError and OSError exit 2.
"""


class ValidationError(ValueError):
    """Bad runtime input: wrong shape, non-finite values, out-of-range args."""


class ConfigurationError(ValidationError):
    """Bad configuration value (h <= 0, tau <= 0, w outside [0, 1], ...)."""


class DimensionMismatchError(ValidationError):
    """Operands disagree on embedding dimension or class count."""


class FormatError(Exception):
    """Corrupt or unparseable file. Carries the byte offset of the problem."""

    def __init__(self, message: str, *, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset
