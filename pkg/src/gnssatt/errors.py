"""Exception types shared across the package.

Every failure class the command line distinguishes maps to exactly one
exception here; ``cli.EXIT_CODES`` holds the mapping.
"""

from __future__ import annotations


class GnssAttError(Exception):
    """Base class for all package errors."""


class InvalidObservation(GnssAttError, ValueError):
    """A domain value violates its invariants."""


class ParseError(GnssAttError, ValueError):
    """Structural failure while reading an input log."""

    def __init__(self, message: str, warnings: list[tuple[int, str]] | None = None):
        super().__init__(message)
        self.warnings = list(warnings or [])


class EmptyInput(ParseError):
    """No usable record was found."""


class NonMonotonicTime(ParseError):
    """Timestamps go backwards."""


class DuplicateSatellite(ParseError):
    """The same satellite appears twice in one epoch."""


class EmptyWindow(GnssAttError, ValueError):
    """A statistics window contains no samples."""


class EmptySample(GnssAttError, ValueError):
    """An empirical distribution was requested for zero values."""


class SeriesTooShort(GnssAttError, ValueError):
    """The series does not cover initialisation plus measurement time."""


class OutOfOrderEpoch(GnssAttError, ValueError):
    """An epoch was fed to the online detector out of time order."""


class InvalidConfig(GnssAttError, ValueError):
    """Detector configuration violates its invariants."""


class EmptyClass(GnssAttError, ValueError):
    """A calibration class has no series."""


class InvalidSpec(GnssAttError, ValueError):
    """A synthetic scenario description is invalid."""
