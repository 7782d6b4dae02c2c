"""Core domain types for GNSS status measurements.

A :class:`RawSeries` is the universal input of the package: an ordered list of
:class:`Epoch` snapshots, each holding one :class:`SatelliteObservation` per
satellite the receiver reports.  The per-observation fields mirror what the
Android ``GnssStatus`` object exposes (C/N0, azimuth, elevation, constellation,
svid, almanac/ephemeris flags, used-in-fix).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

from .errors import InvalidObservation

CN0_CEILING_DBHZ = 64.0


class ConstellationId(IntEnum):
    """GNSS constellation; integer values follow Android's constellation codes."""

    UNKNOWN = 0
    GPS = 1
    SBAS = 2
    GLONASS = 3
    QZSS = 4
    BEIDOU = 5
    GALILEO = 6

    @classmethod
    def parse(cls, token: str) -> "ConstellationId":
        try:
            return cls[token.strip().upper()]
        except KeyError:
            raise ValueError(f"unknown constellation {token!r}") from None

    def format(self) -> str:
        return self.name


@dataclass(frozen=True, order=True, slots=True)
class SatelliteKey:
    constellation: ConstellationId
    svid: int

    def __post_init__(self):
        if not isinstance(self.constellation, ConstellationId):
            raise InvalidObservation(f"bad constellation {self.constellation!r}")
        if isinstance(self.svid, bool) or not isinstance(self.svid, int) or self.svid < 1:
            raise InvalidObservation(f"svid must be a positive integer, got {self.svid!r}")

    @classmethod
    def parse(cls, text: str) -> "SatelliteKey":
        """Parse ``CONST:SVID`` (e.g. ``GPS:5``)."""
        const, sep, svid = text.partition(":")
        if not sep:
            raise ValueError(f"expected CONST:SVID, got {text!r}")
        return cls(ConstellationId.parse(const), int(svid))

    def __str__(self) -> str:
        return f"{self.constellation.name}:{self.svid}"


@dataclass(frozen=True, slots=True)
class SatelliteObservation:
    """One satellite at one epoch.

    ``signal_present`` and ``used_in_fix`` are stored explicitly rather than
    inferred from the C/N0 value.  Satellites that are predicted but not
    tracked carry ``signal_present=False`` and ``cn0_dbhz=0``.
    """

    key: SatelliteKey
    cn0_dbhz: float
    azimuth_deg: float
    elevation_deg: float
    signal_present: bool
    used_in_fix: bool
    has_almanac: bool = False
    has_ephemeris: bool = False

    def __post_init__(self):
        for name in ("cn0_dbhz", "azimuth_deg", "elevation_deg"):
            value = getattr(self, name)
            if not math.isfinite(value):
                raise InvalidObservation(f"{name} must be finite, got {value!r}")
        if not 0.0 <= self.cn0_dbhz <= CN0_CEILING_DBHZ:
            raise InvalidObservation(f"cn0 {self.cn0_dbhz} outside [0, {CN0_CEILING_DBHZ}]")
        if not 0.0 <= self.azimuth_deg < 360.0:
            raise InvalidObservation(f"azimuth {self.azimuth_deg} outside [0, 360)")
        if not -90.0 <= self.elevation_deg <= 90.0:
            raise InvalidObservation(f"elevation {self.elevation_deg} outside [-90, 90]")
        if self.used_in_fix and not self.signal_present:
            raise InvalidObservation(f"{self.key} used in fix without a signal")
        if not self.signal_present and self.cn0_dbhz != 0.0:
            raise InvalidObservation(f"{self.key} has C/N0 without a signal")


@dataclass(frozen=True, slots=True)
class Epoch:
    """All observations reported at one timestamp.

    Observations are kept sorted by satellite key, so two epochs holding the
    same observations compare equal regardless of input order.
    """

    timestamp_s: float
    observations: tuple[SatelliteObservation, ...] = ()

    def __post_init__(self):
        if not math.isfinite(self.timestamp_s):
            raise InvalidObservation(f"timestamp must be finite, got {self.timestamp_s!r}")
        obs = tuple(sorted(self.observations, key=lambda o: o.key))
        for a, b in zip(obs, obs[1:]):
            if a.key == b.key:
                raise InvalidObservation(f"duplicate satellite {a.key} at t={self.timestamp_s}")
        object.__setattr__(self, "observations", obs)

    @property
    def satellite_count(self) -> int:
        return satellite_count(self)

    @property
    def fix_count(self) -> int:
        return fix_count(self)

    @property
    def max_cn0(self) -> Optional[float]:
        return epoch_max_cn0(self)


@dataclass(frozen=True, slots=True)
class RawSeries:
    epochs: tuple[Epoch, ...] = ()
    cadence_s: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.cadence_s) and self.cadence_s > 0):
            raise InvalidObservation(f"cadence must be positive, got {self.cadence_s!r}")
        epochs = tuple(self.epochs)
        for a, b in zip(epochs, epochs[1:]):
            if not b.timestamp_s > a.timestamp_s:
                raise InvalidObservation(
                    f"timestamps not strictly increasing: {a.timestamp_s} then {b.timestamp_s}"
                )
        object.__setattr__(self, "epochs", epochs)

    def __len__(self) -> int:
        return len(self.epochs)

    def __iter__(self):
        return iter(self.epochs)

    @property
    def start_s(self) -> float:
        return self.epochs[0].timestamp_s if self.epochs else 0.0

    @property
    def span_s(self) -> float:
        """Covered time: last minus first timestamp plus one cadence interval."""
        if not self.epochs:
            return 0.0
        return self.epochs[-1].timestamp_s - self.epochs[0].timestamp_s + self.cadence_s

    def relative_time(self, epoch: Epoch) -> float:
        return relative_time(epoch.timestamp_s, self.start_s)

    def map_observations(self, fn) -> "RawSeries":
        """Return a copy with ``fn`` applied to every observation."""
        return RawSeries(
            tuple(Epoch(e.timestamp_s, tuple(fn(o) for o in e.observations)) for e in self.epochs),
            self.cadence_s,
        )


def relative_time(timestamp_s: float, origin_s: float) -> float:
    # rounding absorbs float noise from subtracting millisecond timestamps
    return round(timestamp_s - origin_s, 9)


def satellite_count(epoch: Epoch) -> int:
    """Number of satellites with a received signal."""
    return sum(1 for o in epoch.observations if o.signal_present)


def fix_count(epoch: Epoch) -> int:
    """Number of satellites used in the position fix."""
    return sum(1 for o in epoch.observations if o.used_in_fix)


def epoch_max_cn0(epoch: Epoch) -> Optional[float]:
    """Strongest C/N0 among received satellites, or None if nothing is received."""
    values = [o.cn0_dbhz for o in epoch.observations if o.signal_present]
    return max(values) if values else None

