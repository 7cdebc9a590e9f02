"""
Exception hierarchy shared by every module.

All toolkit failures derive from ``PoseCapError`` so the CLI can turn them into
a nonzero exit status and the HTTP service into a 422 response.
"""
from typing import Sequence

from pydantic import ValidationError


class PoseCapError(Exception):
    """Base class for all toolkit errors."""


class FormatError(PoseCapError):
    """A file or record does not conform to its schema."""

    def __init__(self, message: str, field_path: str | None = None):
        self.field_path = field_path
        super().__init__(f"{field_path}: {message}" if field_path else message)


class ConfigurationError(PoseCapError):
    """Inputs are individually valid but cannot be used together."""


class PoseIOError(PoseCapError):
    """Reading or writing a file failed."""


class DegeneracyError(PoseCapError):
    """A geometric configuration has no unique solution."""


class BehindCameraError(PoseCapError):
    """A point has nonpositive depth in a camera frame."""


class ArityError(PoseCapError):
    """Too few inputs for the operation."""


class GapError(PoseCapError):
    """A joint has fewer than two detections (or a missing marker) at a frame."""

    def __init__(self, message: str, joint: str | None = None, frame: int | None = None):
        self.joint = joint
        self.frame = frame
        where = []
        if joint is not None:
            where.append(f"joint={joint}")
        if frame is not None:
            where.append(f"frame={frame}")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class StructuralError(PoseCapError):
    """A candidate graph is malformed."""


class SpecError(PoseCapError):
    """A design or generator spec violates its invariants."""

    def __init__(self, message: str, field: str | None = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class LengthError(PoseCapError):
    """A signal or sequence is too short."""

    def __init__(self, message: str, channel: str | None = None):
        self.channel = channel
        super().__init__(f"{message} (channel={channel})" if channel else message)


class ShapeError(PoseCapError):
    """Arrays that must agree in shape do not."""


def _loc_path(loc: Sequence) -> str:
    return ".".join(str(part) for part in loc) or "<root>"


def format_error_from(exc: ValidationError, prefix: str | None = None) -> FormatError:
    """
    Convert a pydantic validation error into a FormatError naming the first bad field.

    Args:
        exc: The validation error
        prefix: Optional location prepended to the field path (e.g. a line number)

    Returns:
        FormatError: Error whose ``field_path`` points at the offending field
    """
    first = exc.errors()[0]
    path = _loc_path(first.get("loc", ()))
    if prefix:
        path = f"{prefix}.{path}" if path != "<root>" else prefix
    return FormatError(first.get("msg", "invalid value"), field_path=path)


def spec_error_from(exc: ValidationError) -> SpecError:
    """Convert a pydantic validation error on a spec model into a SpecError."""
    first = exc.errors()[0]
    return SpecError(first.get("msg", "invalid value"), field=_loc_path(first.get("loc", ())))
