"""Synthetic GNSS status logs for labelled desk-scale evaluation.

A scenario is a set of satellite tracks with linear elevation/azimuth drift,
a channel that turns geometry into C/N0 and a receiver model that decides
which satellites are reported as received and which enter the position fix.

Channel, per epoch and satellite::

    c = peak + 20 * exponent * log10(sin(max(el, 5 deg)))
          - attenuation - (mask penalty if the azimuth is outside the open sky sector)
          + clipped gaussian jitter

Receiver: a satellite is reported (rho = 1) once ``c`` has stayed at or above the
acquisition threshold for the acquisition dwell, which shrinks with the
noise-free margin over the threshold (weak satellites take longer).  A fix
(chi = 1) needs at least ``fix_min_satellites`` received satellites whose ``c``
has stayed at or above the tracking threshold for ``fix_warmup_s``.

Values are quantised to GAD-CSV precision so generated series survive a
write/parse round trip unchanged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from enum import Enum
from typing import Optional

import numpy as np

from .errors import InvalidSpec
from .model import (
    CN0_CEILING_DBHZ,
    ConstellationId,
    Epoch,
    RawSeries,
    SatelliteKey,
    SatelliteObservation,
)

MIN_ELEVATION_FOR_GAIN_DEG = 5.0
TIME_EPS = 1e-9


@dataclass(frozen=True)
class SatTrack:
    key: SatelliteKey
    el_start_deg: float
    el_end_deg: float
    az_start_deg: float
    az_end_deg: float

    def validate(self) -> None:
        for v in (self.el_start_deg, self.el_end_deg, self.az_start_deg, self.az_end_deg):
            if not math.isfinite(v):
                raise InvalidSpec(f"track {self.key}: non-finite angle")
        for el in (self.el_start_deg, self.el_end_deg):
            if not -10.0 <= el <= 90.0:
                raise InvalidSpec(f"track {self.key}: elevation {el} outside [-10, 90]")


@dataclass(frozen=True)
class ChannelModel:
    open_sky_peak_dbhz: float = 42.0
    elevation_exponent: float = 1.0
    attenuation_db: float = 0.0
    sky_visibility_fraction: float = 1.0
    noise_std_dbhz: float = 1.0
    # open sky sector is [start, start + 360 * fraction) in azimuth
    visible_azimuth_start_deg: float = 0.0
    mask_penalty_db: float = 30.0

    def validate(self) -> None:
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise InvalidSpec(f"channel.{f.name} must be finite")
        if self.attenuation_db < 0:
            raise InvalidSpec("channel.attenuation_db must be >= 0")
        if not 0.0 < self.sky_visibility_fraction <= 1.0:
            raise InvalidSpec("channel.sky_visibility_fraction must be in (0, 1]")
        if self.noise_std_dbhz < 0:
            raise InvalidSpec("channel.noise_std_dbhz must be >= 0")
        if self.elevation_exponent < 0:
            raise InvalidSpec("channel.elevation_exponent must be >= 0")
        if self.mask_penalty_db < 0:
            raise InvalidSpec("channel.mask_penalty_db must be >= 0")


@dataclass(frozen=True)
class ReceiverModel:
    acquisition_threshold_dbhz: float = 14.0
    tracking_threshold_dbhz: float = 25.0
    fix_min_satellites: int = 4
    fix_warmup_s: float = 35.0
    # dwell needed at 0 dB margin over the acquisition threshold; 0 = immediate
    acquisition_dwell_s: float = 0.0

    def validate(self) -> None:
        for f in fields(self):
            if not math.isfinite(getattr(self, f.name)):
                raise InvalidSpec(f"receiver.{f.name} must be finite")
        if self.fix_min_satellites < 4 or int(self.fix_min_satellites) != self.fix_min_satellites:
            raise InvalidSpec("receiver.fix_min_satellites must be an integer >= 4")
        if self.fix_warmup_s < 0 or self.acquisition_dwell_s < 0:
            raise InvalidSpec("receiver durations must be >= 0")


@dataclass(frozen=True)
class ScenarioSpec:
    tracks: tuple[SatTrack, ...]
    channel: ChannelModel = field(default_factory=ChannelModel)
    receiver: ReceiverModel = field(default_factory=ReceiverModel)
    duration_s: float = 400.0
    cadence_s: float = 1.0
    seed: int = 0
    name: str = "custom"

    def validate(self) -> None:
        if not (math.isfinite(self.duration_s) and self.duration_s > 0):
            raise InvalidSpec(f"duration_s must be > 0, got {self.duration_s}")
        if not (math.isfinite(self.cadence_s) and self.cadence_s > 0):
            raise InvalidSpec(f"cadence_s must be > 0, got {self.cadence_s}")
        if round(self.duration_s / self.cadence_s) < 1:
            raise InvalidSpec("duration shorter than one cadence interval")
        if not isinstance(self.seed, int) or self.seed < 0:
            raise InvalidSpec(f"seed must be a non-negative integer, got {self.seed!r}")
        keys = [t.key for t in self.tracks]
        if len(set(keys)) != len(keys):
            raise InvalidSpec("duplicate satellite among tracks")
        for track in self.tracks:
            track.validate()
        self.channel.validate()
        self.receiver.validate()


def elevation_gain_db(el_deg, exponent: float):
    """dB offset relative to zenith: 0 at 90 deg, decreasing toward the horizon."""
    el = np.radians(np.maximum(el_deg, MIN_ELEVATION_FOR_GAIN_DEG))
    return 20.0 * exponent * np.log10(np.sin(el))


def _streak_start(active: np.ndarray, start: np.ndarray, t: float) -> np.ndarray:
    return np.where(active, np.where(np.isnan(start), t, start), np.nan)


def generate(spec: ScenarioSpec) -> RawSeries:
    """Render ``spec`` into a labelled-environment RawSeries (deterministic per seed)."""
    spec.validate()
    ch, rx = spec.channel, spec.receiver
    n = int(round(spec.duration_s / spec.cadence_s))
    m = len(spec.tracks)
    times = np.round(np.arange(n) * spec.cadence_s, 3)
    if m == 0:
        return RawSeries(tuple(Epoch(float(t)) for t in times), spec.cadence_s)

    frac = (times / spec.duration_s)[:, None]
    el0 = np.array([t.el_start_deg for t in spec.tracks])
    el1 = np.array([t.el_end_deg for t in spec.tracks])
    az0 = np.array([t.az_start_deg for t in spec.tracks])
    az1 = np.array([t.az_end_deg for t in spec.tracks])
    el = np.round(el0 + (el1 - el0) * frac, 1)
    az = np.round((az0 + (az1 - az0) * frac) % 360.0, 1) % 360.0

    visible = ((az - ch.visible_azimuth_start_deg) % 360.0) < 360.0 * ch.sky_visibility_fraction
    ideal = (
        ch.open_sky_peak_dbhz
        + elevation_gain_db(el, ch.elevation_exponent)
        - ch.attenuation_db
        - np.where(visible, 0.0, ch.mask_penalty_db)
    )
    # drawn for every cell so the jitter does not depend on other parameters
    rng = np.random.default_rng(spec.seed)
    sigma = ch.noise_std_dbhz
    noise = np.clip(rng.standard_normal((n, m)) * sigma, -4.0 * sigma, 4.0 * sigma)
    cap = min(math.floor((ch.open_sky_peak_dbhz + 4.0 * sigma) * 10.0) / 10.0, CN0_CEILING_DBHZ)
    cn0 = np.clip(np.round(ideal + noise, 1), 0.0, cap)
    above = el >= 0.0

    if rx.acquisition_dwell_s > 0:
        margin = ideal - rx.acquisition_threshold_dbhz
        with np.errstate(over="ignore"):
            dwell = np.where(margin > 0, rx.acquisition_dwell_s * 10.0 ** (-margin / 10.0), np.inf)
    else:
        dwell = np.zeros((n, m))

    acq_start = np.full(m, np.nan)
    elig_start = np.full(m, np.nan)
    keys = [t.key for t in spec.tracks]
    epochs = []
    el_rows, az_rows, cn0_rows = el.tolist(), az.tolist(), cn0.tolist()
    for i, t in enumerate(times.tolist()):
        acq_ok = above[i] & (cn0[i] >= rx.acquisition_threshold_dbhz)
        acq_start = _streak_start(acq_ok, acq_start, t)
        with np.errstate(invalid="ignore"):
            acquired = acq_ok & (t - acq_start >= dwell[i] - TIME_EPS)
        elig_ok = above[i] & (cn0[i] >= rx.tracking_threshold_dbhz)
        elig_start = _streak_start(elig_ok, elig_start, t)
        with np.errstate(invalid="ignore"):
            ready = acquired & elig_ok & (t - elig_start >= rx.fix_warmup_s - TIME_EPS)
        in_fix = ready if int(ready.sum()) >= rx.fix_min_satellites else np.zeros(m, dtype=bool)

        acquired_l, fix_l, ready_l = acquired.tolist(), in_fix.tolist(), ready.tolist()
        obs = []
        for j in range(m):
            if not above[i, j]:
                continue
            rho = acquired_l[j]
            obs.append(
                SatelliteObservation(
                    keys[j],
                    cn0_rows[i][j] if rho else 0.0,
                    az_rows[i][j],
                    el_rows[i][j],
                    rho,
                    fix_l[j],
                    True,
                    ready_l[j],
                )
            )
        epochs.append(Epoch(t, tuple(obs)))
    return RawSeries(tuple(epochs), spec.cadence_s)


# ---------------------------------------------------------------------------
# presets


class Preset(Enum):
    OPEN_SKY = "open_sky"
    URBAN_CANYON = "urban_canyon"
    INDOOR_WINDOW = "indoor_window"
    DEEP_INDOOR = "deep_indoor"


# one consumer-grade receiver shared by all presets
DEVICE_RECEIVER = ReceiverModel(
    acquisition_threshold_dbhz=14.0,
    tracking_threshold_dbhz=25.0,
    fix_min_satellites=4,
    fix_warmup_s=35.0,
    acquisition_dwell_s=60.0,
)

# attenuation of a room behind closed, coated office windows
ROOM_ATTENUATION_DB = 16.0


def _track(rng, key, el_lo, el_hi, az_lo=0.0, az_hi=360.0, drift=5.0) -> SatTrack:
    el_start = float(np.round(rng.uniform(el_lo, el_hi), 1))
    el_end = float(np.clip(np.round(el_start + rng.uniform(-drift, drift), 1), el_lo, el_hi))
    az_start = float(np.round(rng.uniform(az_lo, az_hi), 1)) % 360.0
    az_end = float(np.round(az_start + rng.uniform(-drift, drift), 1))
    return SatTrack(key, el_start, el_end, az_start, az_end)


def _keys(rng, count: int) -> list[SatelliteKey]:
    """Mix of GPS and GLONASS satellites with distinct svids."""
    n_glo = count // 3
    gps = rng.choice(np.arange(1, 33), size=count - n_glo, replace=False)
    glo = rng.choice(np.arange(65, 89), size=n_glo, replace=False)
    return [SatelliteKey(ConstellationId.GPS, int(s)) for s in gps] + [
        SatelliteKey(ConstellationId.GLONASS, int(s)) for s in glo
    ]


def _sector_tracks(rng, keys, bands, start, width):
    """Tracks for ``keys`` with elevation bands and azimuth inside the sector."""
    margin = 5.0
    return [
        _track(rng, k, lo, hi, start + margin, start + width - margin)
        for k, (lo, hi) in zip(keys, bands)
    ]


def preset_kind(name) -> Preset:
    """Accept a Preset, its value (``open_sky``) or its name (``OPEN_SKY``)."""
    if isinstance(name, Preset):
        return name
    try:
        return Preset[str(name).upper()]
    except KeyError:
        raise InvalidSpec(f"unknown preset {name!r}") from None


def preset(name, seed: int = 0, duration_s: float = 400.0, cadence_s: float = 1.0) -> ScenarioSpec:
    """Scenario for one of the reference environments.

    OPEN_SKY
        Unobstructed sky: eight satellites between 15 and 85 deg elevation,
        several well above 30 dB-Hz, first fix after the receiver warm-up.
    URBAN_CANYON
        Outdoor street between tall buildings: half of the azimuth circle is
        blocked, the rest is received unattenuated.
    INDOOR_WINDOW
        Inside a room behind closed windows: the window side of the sky is
        seen through 16 dB of attenuation, most satellites land between 15
        and 21 dB-Hz, a few high ones just above 25 dB-Hz, no fix.
    DEEP_INDOOR
        Far from the window: strong attenuation and little sky, practically
        nothing is received.
    """
    kind = preset_kind(name)
    rng = np.random.default_rng([seed, 0x5A7E])
    win_start = float(np.round(rng.uniform(0.0, 360.0), 1))

    if kind is Preset.OPEN_SKY:
        keys = _keys(rng, 8)
        bands = [(45.0, 85.0)] * 2 + [(15.0, 85.0)] * 6
        tracks = [_track(rng, k, lo, hi) for k, (lo, hi) in zip(keys, bands)]
        channel = ChannelModel(noise_std_dbhz=1.0)
    elif kind is Preset.URBAN_CANYON:
        keys = _keys(rng, 10)
        visible = _sector_tracks(rng, keys[:5], [(45.0, 85.0)] * 2 + [(15.0, 60.0)] * 3, win_start, 180.0)
        blocked = _sector_tracks(rng, keys[5:], [(10.0, 50.0)] * 5, win_start + 180.0, 180.0)
        tracks = visible + blocked
        channel = ChannelModel(
            attenuation_db=2.0, sky_visibility_fraction=0.5,
            visible_azimuth_start_deg=win_start, noise_std_dbhz=1.5,
        )
    elif kind is Preset.INDOOR_WINDOW:
        keys = _keys(rng, 10)
        bands = [(60.0, 85.0)] * 3 + [(18.0, 32.0)] * 4
        visible = _sector_tracks(rng, keys[:7], bands, win_start, 180.0)
        blocked = _sector_tracks(rng, keys[7:], [(10.0, 60.0)] * 3, win_start + 180.0, 180.0)
        tracks = visible + blocked
        channel = ChannelModel(
            attenuation_db=ROOM_ATTENUATION_DB, sky_visibility_fraction=0.5,
            visible_azimuth_start_deg=win_start, noise_std_dbhz=1.0,
        )
    else:
        keys = _keys(rng, 9)
        tracks = [_track(rng, k, 10.0, 85.0) for k in keys]
        channel = ChannelModel(
            attenuation_db=30.0, sky_visibility_fraction=0.25,
            visible_azimuth_start_deg=win_start, noise_std_dbhz=1.0,
        )
    return ScenarioSpec(
        tuple(tracks), channel, DEVICE_RECEIVER, duration_s, cadence_s, seed, kind.name
    )


# ---------------------------------------------------------------------------
# plain-text key-value scenario files
#
#   # comment
#   name = OPEN_SKY
#   duration_s = 400.0
#   channel.attenuation_db = 16.0
#   receiver.fix_warmup_s = 35.0
#   track = GPS:5 <el_start> <el_end> <az_start> <az_end>

_SCALARS = {"duration_s": float, "cadence_s": float, "seed": int, "name": str}


def format_scenario(spec: ScenarioSpec) -> str:
    lines = [
        f"name = {spec.name}",
        f"duration_s = {spec.duration_s!r}",
        f"cadence_s = {spec.cadence_s!r}",
        f"seed = {spec.seed}",
    ]
    for prefix, part in (("channel", spec.channel), ("receiver", spec.receiver)):
        for f in fields(part):
            lines.append(f"{prefix}.{f.name} = {getattr(part, f.name)!r}")
    for t in spec.tracks:
        lines.append(
            f"track = {t.key} {t.el_start_deg!r} {t.el_end_deg!r} {t.az_start_deg!r} {t.az_end_deg!r}"
        )
    return "\n".join(lines) + "\n"


def parse_scenario(text: str) -> ScenarioSpec:
    """Parse a scenario file; raises InvalidSpec on any defect."""
    scalars: dict = {}
    parts: dict[str, dict] = {"channel": {}, "receiver": {}}
    part_types = {
        "channel": {f.name: f.type for f in fields(ChannelModel)},
        "receiver": {f.name: f.type for f in fields(ReceiverModel)},
    }
    tracks = []
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        if not sep:
            raise InvalidSpec(f"line {line_no}: expected key = value")
        try:
            if key == "track":
                sat, *angles = value.split()
                if len(angles) != 4:
                    raise ValueError("track needs CONST:SVID and four angles")
                tracks.append(SatTrack(SatelliteKey.parse(sat), *(float(a) for a in angles)))
            elif key in _SCALARS:
                scalars[key] = _SCALARS[key](value)
            else:
                prefix, _, attr = key.partition(".")
                if prefix not in parts or attr not in part_types[prefix]:
                    raise ValueError(f"unknown key {key!r}")
                kind = part_types[prefix][attr]
                parts[prefix][attr] = int(value) if kind == "int" else float(value)
        except (ValueError, TypeError) as exc:
            raise InvalidSpec(f"line {line_no}: {exc}") from None
    spec = ScenarioSpec(
        tuple(tracks),
        ChannelModel(**parts["channel"]),
        ReceiverModel(**parts["receiver"]),
        **scalars,
    )
    spec.validate()
    return spec


def with_seed(spec: ScenarioSpec, seed: Optional[int]) -> ScenarioSpec:
    return spec if seed is None else replace(spec, seed=seed)
