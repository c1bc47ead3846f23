"""Exception types shared across the package."""


class GafnetError(Exception):
    """Base class for package errors."""


class DataFormatError(GafnetError):
    """Malformed or unsupported input data (files, headers, byte streams)."""


class ShapeMismatchError(GafnetError):
    """Array shapes incompatible with an operation's contract."""
