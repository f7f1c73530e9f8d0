"""Exception types shared across the package."""

from __future__ import annotations


class SlidetransError(Exception):
    """Base class for all errors raised by this package."""


class StreamError(SlidetransError):
    """Raised when a frame source cannot be opened or decoded.

    byte_offset, when known, points at the first byte of the payload
    that could not be satisfied.
    """

    def __init__(self, message: str, byte_offset: int | None = None):
        if byte_offset is not None:
            message = f"{message} (byte offset {byte_offset})"
        super().__init__(message)
        self.byte_offset = byte_offset


class ContractError(SlidetransError):
    """Raised when a model archive does not satisfy its declared I/O contract."""


class BackendError(SlidetransError):
    """Raised when a classifier backend rejects or cannot serve a request."""


class DetectorError(SlidetransError):
    """Raised when the candidate scan fails; carries the frame index if known."""

    def __init__(self, message: str, frame_index: int | None = None):
        if frame_index is not None:
            message = f"{message} (frame {frame_index})"
        super().__init__(message)
        self.frame_index = frame_index


class SchemaError(SlidetransError):
    """Raised when a document fails validation; names the offending field."""

    def __init__(self, message: str, field: str | None = None):
        super().__init__(message)
        self.field = field
