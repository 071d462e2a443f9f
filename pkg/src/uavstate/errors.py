"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class UavStateError(Exception):
    """Base class for every error raised by this package."""


# georef
class InsufficientGCPs(UavStateError):
    pass


class CoincidentGCPs(UavStateError):
    pass


class NonPositiveDistance(UavStateError):
    pass


class ZeroBaseline(UavStateError):
    pass


# stabilize
class DegenerateSample(UavStateError):
    pass


class NoConsensus(UavStateError):
    pass


# measure
class DegenerateBox(UavStateError):
    pass


class CornerAboveCamera(UavStateError):
    pass


class ZeroSideLength(UavStateError):
    pass


# filter
class NonPositiveDt(UavStateError):
    pass


class NonFiniteMeasurement(UavStateError):
    pass


class EmptyTrack(UavStateError):
    pass


class NonMonotonicTime(UavStateError):
    pass


# sync
class InsufficientEvents(UavStateError):
    pass


class ResidualTooLarge(UavStateError):
    pass


class NonPositiveFps(UavStateError):
    pass


# bench
class OutOfSpan(UavStateError):
    pass


class LengthMismatch(UavStateError):
    pass


# sim
class InvalidScenario(UavStateError):
    pass


class SchemaError(UavStateError):
    """Malformed input file. The message names file, line and column."""

    def __init__(self, path, line: int | None, column: str | None, reason: str) -> None:
        self.path = str(path)
        self.line = line
        self.column = column
        self.reason = reason
        where = self.path
        if line is not None:
            where += f":{line}"
        if column is not None:
            where += f" (column {column!r})"
        super().__init__(f"{where}: {reason}")
