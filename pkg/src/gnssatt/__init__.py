"""Detect attenuating radio environments from GNSS status measurements."""

__version__ = "0.1.0"
