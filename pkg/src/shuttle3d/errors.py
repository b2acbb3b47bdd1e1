"""Exception types shared across the package."""

from __future__ import annotations


class Shuttle3DError(Exception):
    """Base class for every error raised by this package."""


class ConfigError(Shuttle3DError):
    """Invalid or inconsistent configuration document."""


class DataError(Shuttle3DError):
    """Input data that cannot be processed."""


# geometry
class BehindCamera(DataError):
    pass


class DegenerateRays(DataError):
    pass


# flight_sim
class InvalidScript(ConfigError):
    pass


# detection_io
class FrameOutOfRange(DataError):
    pass


class ParseError(DataError):
    def __init__(self, message: str, line: int | None = None, path: str | None = None):
        self.line = line
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class SchemaError(ParseError):
    pass


class NonMonotoneTimestamp(ParseError):
    pass


# tracker
class InsufficientPoints(DataError):
    pass


class SingularFit(DataError):
    pass


class ExtrapolationTooFar(DataError):
    pass


class AlignmentError(DataError):
    pass


# compensation / metrics
class TooSparse(DataError):
    pass


class TooFewPoints(DataError):
    pass


class ZeroDt(DataError):
    pass
