class FracvoxError(Exception):
    """Base class for all package errors."""


class DomainError(FracvoxError, ValueError):
    """An argument is outside the domain an operation accepts."""


class StateError(FracvoxError, ValueError):
    """An object is in the wrong state for the operation (e.g. color space)."""


class PLYParseError(FracvoxError, ValueError):
    """Malformed PLY header or body."""


class CorruptionError(FracvoxError, ValueError):
    """A bitstream or entropy-coded section failed an integrity check."""
