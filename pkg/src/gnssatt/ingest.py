"""Readers and writers for GNSS status logs.

Two input formats are supported:

* GAD-CSV, the package's canonical text format (one line per satellite per
  epoch, fixed numeric precision, see :data:`GAD_HEADER`);
* NMEA-0183 streams, from which GSV (satellites in view), GSA (satellites
  used in fix) and GGA/RMC (epoch time) sentences are consumed.

Parsers never raise on malformed lines; those are skipped and listed in the
returned :class:`ParseReport`.  Only structural problems raise (see
:mod:`gnssatt.errors`).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import IO, Iterator, Optional, Union

from .errors import DuplicateSatellite, EmptyInput, InvalidObservation, NonMonotonicTime
from .model import (
    CN0_CEILING_DBHZ,
    ConstellationId,
    Epoch,
    RawSeries,
    SatelliteKey,
    SatelliteObservation,
)

GAD_HEADER = "t_s,constellation,svid,cn0_dbhz,az_deg,el_deg,rho,chi,alm,eph"
GAD_FIELDS = 10

TextSource = Union[str, bytes, IO[str], IO[bytes]]


@dataclass
class ParseReport:
    series: RawSeries
    lines_total: int = 0
    lines_skipped: int = 0
    warnings: list[tuple[int, str]] = field(default_factory=list)


def _lines(source: TextSource) -> Iterator[str]:
    """Yield text lines from a string, bytes or an open (text or binary) stream."""
    if isinstance(source, bytes):
        source = source.decode("utf-8", errors="replace")
    if isinstance(source, str):
        yield from io.StringIO(source, newline=None)
        return
    for line in source:
        if isinstance(line, bytes):
            line = line.decode("utf-8", errors="replace")
        yield line


# ---------------------------------------------------------------------------
# GAD-CSV


def format_gad_record(t_s: float, obs: SatelliteObservation) -> str:
    return (
        f"{t_s:.3f},{obs.key.constellation.name},{obs.key.svid},"
        f"{obs.cn0_dbhz:.1f},{obs.azimuth_deg:.1f},{obs.elevation_deg:.1f},"
        f"{int(obs.signal_present)},{int(obs.used_in_fix)},"
        f"{int(obs.has_almanac)},{int(obs.has_ephemeris)}"
    )


def write_gad_csv(series: RawSeries, stream: Optional[IO[str]] = None) -> str:
    """Serialise ``series`` to GAD-CSV; output is byte-deterministic.

    Returns the text and, if ``stream`` is given, also writes it there.
    """
    lines = [GAD_HEADER]
    for epoch in series.epochs:
        if not epoch.observations:
            lines.append(f"{epoch.timestamp_s:.3f}" + "," * (GAD_FIELDS - 1))
            continue
        # Epoch keeps observations sorted by (constellation, svid)
        lines.extend(format_gad_record(epoch.timestamp_s, o) for o in epoch.observations)
    text = "\n".join(lines) + "\n"
    if stream is not None:
        stream.write(text)
    return text


def _flag(token: str) -> bool:
    if token == "1":
        return True
    if token == "0":
        return False
    raise ValueError(f"flag must be 0 or 1, got {token!r}")


def _finite(token: str) -> float:
    value = float(token)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {token!r}")
    return value


def parse_gad_record(line: str) -> tuple[float, Optional[SatelliteObservation]]:
    """Parse one GAD-CSV record; raises ValueError on any defect.

    A record whose satellite fields are all empty marks an epoch with no
    observations and yields ``(t, None)``.
    """
    parts = line.split(",")
    if len(parts) != GAD_FIELDS:
        raise ValueError(f"expected {GAD_FIELDS} fields, got {len(parts)}")
    t_s = _finite(parts[0])
    if not any(parts[1:]):
        return t_s, None
    key = SatelliteKey(ConstellationId.parse(parts[1]), int(parts[2]))
    obs = SatelliteObservation(
        key=key,
        cn0_dbhz=_finite(parts[3]),
        azimuth_deg=_finite(parts[4]),
        elevation_deg=_finite(parts[5]),
        signal_present=_flag(parts[6]),
        used_in_fix=_flag(parts[7]),
        has_almanac=_flag(parts[8]),
        has_ephemeris=_flag(parts[9]),
    )
    return t_s, obs


class _EpochGrouper:
    """Groups time-ordered records into epochs.

    A record joins the open epoch when its timestamp is within half a cadence
    of the epoch's first record; later records open a new epoch, earlier ones
    are a time-order violation.
    """

    def __init__(self, cadence_s: float):
        self.tolerance = cadence_s / 2.0
        self.anchor: Optional[float] = None
        self.pending: dict[SatelliteKey, SatelliteObservation] = {}

    def add(self, t_s: float, obs: Optional[SatelliteObservation], line_no: int) -> Optional[Epoch]:
        """Add a record; returns the epoch it closed, if any."""
        closed = None
        if self.anchor is None:
            self.anchor = t_s
        elif t_s >= self.anchor + self.tolerance:
            closed = self.flush()
            self.anchor = t_s
        elif t_s <= self.anchor - self.tolerance:
            raise NonMonotonicTime(f"line {line_no}: t={t_s} goes back before t={self.anchor}")
        if obs is None:
            return closed
        if obs.key in self.pending:
            raise DuplicateSatellite(f"line {line_no}: {obs.key} repeated at t={self.anchor}")
        self.pending[obs.key] = obs
        return closed

    def flush(self) -> Optional[Epoch]:
        if self.anchor is None:
            return None
        epoch = Epoch(self.anchor, tuple(self.pending.values()))
        self.anchor = None
        self.pending = {}
        return epoch


def iter_gad_epochs(
    source: TextSource,
    cadence_s: float = 1.0,
    warnings: Optional[list[tuple[int, str]]] = None,
) -> Iterator[Epoch]:
    """Yield epochs from GAD-CSV as soon as each one is complete.

    An epoch is complete when the first record of the next one arrives (or the
    input ends).  Invalid lines are appended to ``warnings`` and skipped.
    """
    grouper = _EpochGrouper(cadence_s)
    for line_no, raw in enumerate(_lines(source), start=1):
        line = raw.strip()
        if line_no == 1 and line == GAD_HEADER:
            continue
        if not line:
            continue
        try:
            t_s, obs = parse_gad_record(line)
        except (ValueError, InvalidObservation) as exc:
            if warnings is not None:
                warnings.append((line_no, str(exc)))
            continue
        closed = grouper.add(t_s, obs, line_no)
        if closed is not None:
            yield closed
    last = grouper.flush()
    if last is not None:
        yield last


def parse_gad_csv(source: TextSource, cadence_s: float = 1.0) -> ParseReport:
    """Parse a GAD-CSV document into a :class:`ParseReport`.

    Raises EmptyInput, NonMonotonicTime or DuplicateSatellite on structural
    failure; every other defective line is skipped and reported.
    """
    text_lines = list(_lines(source))
    warnings: list[tuple[int, str]] = []
    epochs = list(iter_gad_epochs(text_lines, cadence_s, warnings))
    header = 1 if text_lines and text_lines[0].strip() == GAD_HEADER else 0
    total = sum(1 for line in text_lines[header:] if line.strip())
    if not epochs:
        raise EmptyInput("no valid GAD-CSV records", warnings)
    return ParseReport(RawSeries(tuple(epochs), cadence_s), total, len(warnings), warnings)


# ---------------------------------------------------------------------------
# NMEA-0183

TALKER_CONSTELLATION = {
    "GP": ConstellationId.GPS,
    "GL": ConstellationId.GLONASS,
    "GA": ConstellationId.GALILEO,
    "GB": ConstellationId.BEIDOU,
    "BD": ConstellationId.BEIDOU,
    "GQ": ConstellationId.QZSS,
    "QZ": ConstellationId.QZSS,
    "GN": ConstellationId.UNKNOWN,
}

# NMEA 4.10 GSA system id field
GSA_SYSTEM_ID = {
    1: ConstellationId.GPS,
    2: ConstellationId.GLONASS,
    3: ConstellationId.GALILEO,
    4: ConstellationId.BEIDOU,
    5: ConstellationId.QZSS,
}


def nmea_checksum(payload: str) -> int:
    """XOR of all characters between ``$`` and ``*``."""
    value = 0
    for ch in payload:
        value ^= ord(ch)
    return value & 0xFF


def split_sentence(line: str) -> list[str]:
    """Validate framing and checksum; return the comma-separated fields.

    Raises ValueError if the line is not a well-formed NMEA sentence.
    """
    line = line.strip()
    if not line.startswith("$"):
        raise ValueError("missing '$'")
    body, star, checksum = line[1:].rpartition("*")
    if not star:
        raise ValueError("missing checksum")
    if len(checksum) != 2 or any(c not in "0123456789abcdefABCDEF" for c in checksum):
        raise ValueError(f"malformed checksum {checksum!r}")
    if int(checksum, 16) != nmea_checksum(body):
        raise ValueError(f"checksum mismatch (got {checksum}, want {nmea_checksum(body):02X})")
    fields = body.split(",")
    if len(fields[0]) < 5:
        raise ValueError(f"bad address field {fields[0]!r}")
    return fields


def _parse_hms(token: str) -> float:
    if len(token) < 6 or not token[:6].isdigit():
        raise ValueError(f"bad time {token!r}")
    hh, mm = int(token[0:2]), int(token[2:4])
    ss = float(token[4:])
    if hh > 23 or mm > 59 or not 0.0 <= ss < 61.0:
        raise ValueError(f"bad time {token!r}")
    return hh * 3600 + mm * 60 + ss


def _opt_float(token: str) -> Optional[float]:
    token = token.strip()
    if not token:
        return None
    value = float(token)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {token!r}")
    return value


def _gsv_constellation(talker: str, svid: int) -> ConstellationId:
    const = TALKER_CONSTELLATION.get(talker, ConstellationId.UNKNOWN)
    if const is ConstellationId.GPS and 33 <= svid <= 64:
        return ConstellationId.SBAS
    return const


class _NmeaCycle:
    """Satellite data collected between two epoch time boundaries."""

    def __init__(self):
        self.time_s: Optional[float] = None
        self.in_view: dict[SatelliteKey, SatelliteObservation] = {}
        self.used: list[tuple[Optional[ConstellationId], int]] = []
        self.has_data = False

    def to_epoch(self, warnings: list[tuple[int, str]], line_no: int) -> Epoch:
        used_keys = set()
        for const, svid in self.used:
            matches = [
                k for k in self.in_view
                if k.svid == svid and (const is None or k.constellation == const)
            ]
            if not matches:
                warnings.append((line_no, f"GSA svid {svid} not in view"))
            used_keys.update(matches)
        observations = []
        for key, obs in self.in_view.items():
            in_fix = key in used_keys
            if in_fix and not obs.signal_present:
                warnings.append((line_no, f"GSA lists untracked satellite {key}"))
                in_fix = False
            observations.append(
                SatelliteObservation(
                    key, obs.cn0_dbhz, obs.azimuth_deg, obs.elevation_deg,
                    obs.signal_present, in_fix,
                )
            )
        return Epoch(self.time_s, tuple(observations))


def _add_gsv(cycle: _NmeaCycle, talker: str, fields: list[str]) -> list[str]:
    """Merge the satellites of one GSV sentence; returns per-satellite problems."""
    if len(fields) < 4:
        raise ValueError("short GSV sentence")
    for tok in fields[1:4]:
        if tok.strip():
            int(tok)  # message count, message number, satellites in view
    sats = fields[4:]
    if len(sats) % 4 == 1:
        sats = sats[:-1]  # trailing NMEA 4.10 signal id
    if len(sats) % 4:
        raise ValueError(f"GSV has {len(sats)} satellite fields")
    problems = []
    for i in range(0, len(sats), 4):
        sv_tok, el_tok, az_tok, snr_tok = sats[i:i + 4]
        if not sv_tok.strip():
            continue
        try:
            svid = int(sv_tok)
            key = SatelliteKey(_gsv_constellation(talker, svid), svid)
            el = _opt_float(el_tok) or 0.0
            az = (_opt_float(az_tok) or 0.0) % 360.0
            snr = _opt_float(snr_tok)
            if snr is not None and snr > CN0_CEILING_DBHZ:
                raise ValueError(f"SNR {snr} above {CN0_CEILING_DBHZ}")
            # blank or zero SNR: predicted but not tracked
            present = snr is not None and snr > 0
            obs = SatelliteObservation(key, snr if present else 0.0, az, el, present, False)
        except (ValueError, InvalidObservation) as exc:
            problems.append(f"GSV satellite {sv_tok!r}: {exc}")
            continue
        previous = cycle.in_view.get(key)
        # multi-signal receivers report one GSV group per band: keep the strongest
        if previous is None or obs.cn0_dbhz > previous.cn0_dbhz:
            cycle.in_view[key] = obs
    cycle.has_data = True
    return problems


def _add_gsa(cycle: _NmeaCycle, talker: str, fields: list[str]) -> None:
    if len(fields) < 15:
        raise ValueError("short GSA sentence")
    const: Optional[ConstellationId] = TALKER_CONSTELLATION.get(talker, ConstellationId.UNKNOWN)
    if len(fields) >= 19 and fields[18].strip():
        const = GSA_SYSTEM_ID.get(int(fields[18], 16), ConstellationId.UNKNOWN)
    if const is ConstellationId.UNKNOWN:
        const = None  # match by svid across constellations
    svids = [int(tok) for tok in fields[3:15] if tok.strip()]
    for svid in svids:
        if const is ConstellationId.GPS and 33 <= svid <= 64:
            cycle.used.append((ConstellationId.SBAS, svid))
        else:
            cycle.used.append((const, svid))
    cycle.has_data = True


class NmeaReader:
    """Incremental NMEA-0183 reader.

    GGA and RMC sentences mark epoch boundaries: satellite data seen under one
    UTC time forms one epoch, emitted when a sentence with a later time (or the
    end of input) arrives.  Timestamps are re-based so that the first epoch is
    at t=0; a single midnight rollover is tolerated.
    """

    def __init__(self):
        self.warnings: list[tuple[int, str]] = []
        self.lines_total = 0
        self.lines_skipped = 0
        self._cycle = _NmeaCycle()
        self._origin: Optional[float] = None
        self._day_offset = 0.0
        self._last_tod: Optional[float] = None
        self._line_no = 0

    def _close(self) -> Optional[Epoch]:
        cycle, self._cycle = self._cycle, _NmeaCycle()
        if cycle.time_s is not None and cycle.has_data:
            return cycle.to_epoch(self.warnings, self._line_no)
        return None

    def _time(self, token: str) -> float:
        tod = _parse_hms(token)
        if self._last_tod is not None and tod < self._last_tod:
            if self._last_tod - tod > 43200.0:
                self._day_offset += 86400.0
            else:
                raise NonMonotonicTime(
                    f"line {self._line_no}: time {token} before previous epoch", self.warnings
                )
        self._last_tod = tod
        if self._origin is None:
            self._origin = tod
        return round(tod + self._day_offset - self._origin, 3)

    def feed(self, raw: str) -> Optional[Epoch]:
        """Consume one line; returns the epoch it completed, if any."""
        self._line_no += 1
        if not raw.strip():
            return None
        self.lines_total += 1
        closed = None
        try:
            fields = split_sentence(raw)
            talker, kind = fields[0][:2], fields[0][-3:]
            if kind in ("GGA", "RMC"):
                if len(fields) < 2:
                    raise ValueError(f"short {kind} sentence")
                t_s = self._time(fields[1])
                if self._cycle.time_s is None:
                    # data seen before the first time sentence belongs to it
                    self._cycle.time_s = t_s
                elif t_s != self._cycle.time_s:
                    closed = self._close()
                    self._cycle.time_s = t_s
            elif kind == "GSV":
                for problem in _add_gsv(self._cycle, talker, fields):
                    self.warnings.append((self._line_no, problem))
            elif kind == "GSA":
                _add_gsa(self._cycle, talker, fields)
            else:
                raise ValueError(f"unsupported sentence {fields[0]}")
        except NonMonotonicTime:
            raise
        except (ValueError, InvalidObservation) as exc:
            self.lines_skipped += 1
            self.warnings.append((self._line_no, str(exc)))
        return closed

    def finish(self) -> Optional[Epoch]:
        return self._close()


def iter_nmea_epochs(source: TextSource, reader: Optional[NmeaReader] = None) -> Iterator[Epoch]:
    """Yield epochs from an NMEA stream as soon as each one is complete."""
    reader = reader or NmeaReader()
    for raw in _lines(source):
        epoch = reader.feed(raw)
        if epoch is not None:
            yield epoch
    last = reader.finish()
    if last is not None:
        yield last


def parse_nmea(source: TextSource, cadence_s: float = 1.0) -> ParseReport:
    """Parse an NMEA-0183 stream into a :class:`ParseReport` (see :class:`NmeaReader`)."""
    reader = NmeaReader()
    epochs = list(iter_nmea_epochs(source, reader))
    if not epochs:
        raise EmptyInput("no complete NMEA epoch", reader.warnings)
    return ParseReport(
        RawSeries(tuple(epochs), cadence_s), reader.lines_total, reader.lines_skipped, reader.warnings
    )


def format_nmea(body: str) -> str:
    """Frame a sentence body (without ``$``) with its checksum."""
    return f"${body}*{nmea_checksum(body):02X}"


def parse_file(path, fmt: str = "gadcsv", cadence_s: float = 1.0) -> ParseReport:
    with open(path, "rb") as fh:
        data = fh.read()
    if fmt == "nmea":
        return parse_nmea(data, cadence_s)
    if fmt == "gadcsv":
        return parse_gad_csv(data, cadence_s)
    raise ValueError(f"unknown format {fmt!r}")
