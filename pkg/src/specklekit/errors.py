"""Exception types shared across the package."""


class SpecklekitError(Exception):
    """Base class for all package errors."""


class RasterFormatError(SpecklekitError):
    """A raster file is malformed, truncated, or uses an unsupported encoding."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class DomainError(SpecklekitError):
    """Input values violate a mathematical precondition."""


class DegenerateInputError(SpecklekitError):
    """Input data is degenerate: constant, empty, or too small to process."""


class ConfigError(SpecklekitError):
    """A configuration file or option combination is invalid."""
