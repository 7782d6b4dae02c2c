"""Attenuating-environment detection.

``detect`` decides, from one recording, whether the receiver sits in an
attenuating environment (1) or not (0).  The first ``init_duration_s`` seconds
are ignored because a receiver that has just started reports fewer and weaker
satellites than it will later; the following ``measure_duration_s`` seconds
are evaluated against a list of threshold criteria.

The defaults (100 s + 100 s, every epoch's strongest C/N0 at most 30 dB-Hz)
were measured on one tablet and must be recalibrated for other receivers,
see :mod:`gnssatt.calibrate`.

``online_step`` implements the same decision incrementally, one epoch at a
time, and always agrees with ``detect`` on the same data.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Optional

from .errors import InvalidConfig, OutOfOrderEpoch, SeriesTooShort
from .model import Epoch, RawSeries, SatelliteKey, SatelliteObservation, relative_time
from .stats import Window

# tolerance when comparing epoch end times with the window end
TIME_EPS = 1e-9


class Metric(Enum):
    """Scalar a criterion thresholds; also the unit of calibration."""

    MAX_CN0 = "max_cn0"
    AVG_CN0 = "avg_cn0"
    DISTINCT_SATS = "distinct_sats"
    FIX_SATS = "fix_sats"


@dataclass(frozen=True)
class Criterion:
    metric: Metric
    threshold: float

    def __post_init__(self):
        object.__setattr__(self, "metric", Metric(self.metric))
        if not math.isfinite(self.threshold):
            raise InvalidConfig(f"threshold must be finite, got {self.threshold}")
        if self.metric in (Metric.DISTINCT_SATS, Metric.FIX_SATS) and self.threshold < 0:
            raise InvalidConfig(f"count threshold must be >= 0, got {self.threshold}")

    def __str__(self) -> str:
        return f"{self.metric.value}<{'=' if self.metric is Metric.MAX_CN0 else ''}{self.threshold:g}"


def MaxCn0Below(threshold: float) -> Criterion:
    """Every epoch's strongest C/N0 is at most ``threshold`` dB-Hz."""
    return Criterion(Metric.MAX_CN0, threshold)


def AvgCn0Below(threshold: float) -> Criterion:
    """Pooled mean C/N0 over the window is below ``threshold`` dB-Hz."""
    return Criterion(Metric.AVG_CN0, threshold)


def DistinctSatsBelow(threshold: float) -> Criterion:
    """Fewer than ``threshold`` different satellites were received."""
    return Criterion(Metric.DISTINCT_SATS, threshold)


def FixSatsBelow(threshold: float) -> Criterion:
    """No epoch used ``threshold`` or more satellites in its fix."""
    return Criterion(Metric.FIX_SATS, threshold)


class Combine(Enum):
    ALL = "all"
    ANY = "any"


class AttenuationLevel(Enum):
    NONE = "none"
    MODERATE = "moderate"
    STRONG = "strong"
    SEVERE = "severe"


@dataclass(frozen=True)
class DetectorConfig:
    init_duration_s: float = 100.0
    measure_duration_s: float = 100.0
    criteria: tuple[Criterion, ...] = (Criterion(Metric.MAX_CN0, 30.0),)
    combine: Combine = Combine.ALL
    elevation_mask_deg: Optional[float] = None
    excluded_svids: frozenset[SatelliteKey] = frozenset()
    # deficit (dB below open-sky baseline) where MODERATE, STRONG, SEVERE begin
    attenuation_steps_db: tuple[float, float, float] = (5.0, 12.0, 20.0)

    def __post_init__(self):
        object.__setattr__(self, "criteria", tuple(self.criteria))
        object.__setattr__(self, "excluded_svids", frozenset(self.excluded_svids))
        try:
            object.__setattr__(self, "combine", Combine(self.combine))
        except ValueError:
            raise InvalidConfig(f"combine must be 'all' or 'any', got {self.combine!r}") from None
        d0, dm = self.init_duration_s, self.measure_duration_s
        if not (math.isfinite(d0) and d0 >= 0):
            raise InvalidConfig(f"init duration must be >= 0, got {d0}")
        if not (math.isfinite(dm) and dm > 0):
            raise InvalidConfig(f"measurement duration must be > 0, got {dm}")
        if not self.criteria:
            raise InvalidConfig("at least one criterion is required")
        if not all(isinstance(c, Criterion) for c in self.criteria):
            raise InvalidConfig("criteria must be Criterion instances")
        if self.elevation_mask_deg is not None and not -90 <= self.elevation_mask_deg <= 90:
            raise InvalidConfig(f"elevation mask out of range: {self.elevation_mask_deg}")
        steps = tuple(float(s) for s in self.attenuation_steps_db)
        if len(steps) != 3 or not steps[0] <= steps[1] <= steps[2]:
            raise InvalidConfig(f"attenuation steps must be 3 ascending values, got {steps}")
        object.__setattr__(self, "attenuation_steps_db", steps)

    @property
    def decision_time_s(self) -> float:
        return self.init_duration_s + self.measure_duration_s

    def measurement_window(self) -> Window:
        return Window(self.init_duration_s, self.measure_duration_s)

    def with_criteria(self, *criteria: Criterion) -> "DetectorConfig":
        return replace(self, criteria=tuple(criteria))


DEFAULT_CONFIG = DetectorConfig()


@dataclass(frozen=True)
class Evidence:
    """Running aggregates over the epochs of a measurement window."""

    epochs: int = 0
    max_cn0: Optional[float] = None
    cn0_total: float = 0.0
    cn0_count: int = 0
    keys: frozenset[SatelliteKey] = frozenset()
    max_fix: int = 0
    # sum over epochs of the strongest C/N0, 0 for epochs without signal
    epoch_max_total: float = 0.0

    def add(self, epoch: Epoch, config: DetectorConfig) -> "Evidence":
        excluded = config.excluded_svids
        mask = config.elevation_mask_deg
        received = [o for o in epoch.observations if o.signal_present and o.key not in excluded]
        cn0 = [o.cn0_dbhz for o in received if _above_mask(o, mask)]
        epoch_max = max(cn0) if cn0 else None
        max_cn0 = self.max_cn0
        if epoch_max is not None and (max_cn0 is None or epoch_max > max_cn0):
            max_cn0 = epoch_max
        fix = sum(1 for o in received if o.used_in_fix)
        return Evidence(
            epochs=self.epochs + 1,
            max_cn0=max_cn0,
            cn0_total=self.cn0_total + sum(cn0),
            cn0_count=self.cn0_count + len(cn0),
            keys=self.keys | {o.key for o in received},
            max_fix=max(self.max_fix, fix),
            epoch_max_total=self.epoch_max_total + (epoch_max or 0.0),
        )

    @property
    def mean_cn0(self) -> Optional[float]:
        return self.cn0_total / self.cn0_count if self.cn0_count else None

    @property
    def mean_epoch_max(self) -> float:
        return self.epoch_max_total / self.epochs if self.epochs else 0.0

    def value(self, metric: Metric) -> float:
        """Scalar for ``metric``; C/N0 metrics fall back to 0 without samples."""
        if metric is Metric.MAX_CN0:
            return self.max_cn0 if self.max_cn0 is not None else 0.0
        if metric is Metric.AVG_CN0:
            mean = self.mean_cn0
            return mean if mean is not None else 0.0
        if metric is Metric.DISTINCT_SATS:
            return float(len(self.keys))
        return float(self.max_fix)

    def satisfies(self, criterion: Criterion) -> bool:
        t = criterion.threshold
        metric = criterion.metric
        if metric is Metric.MAX_CN0:
            # no received satellite counts as maximally attenuated
            return self.max_cn0 is None or self.max_cn0 <= t
        if metric is Metric.AVG_CN0:
            mean = self.mean_cn0
            return mean is None or mean < t
        if metric is Metric.DISTINCT_SATS:
            return len(self.keys) < t
        return self.max_fix < t


def _above_mask(obs: SatelliteObservation, mask: Optional[float]) -> bool:
    return mask is None or obs.elevation_deg >= mask


def accumulate(epochs: Iterable[Epoch], config: DetectorConfig) -> Evidence:
    evidence = Evidence()
    for epoch in epochs:
        evidence = evidence.add(epoch, config)
    return evidence


def combine_outcomes(outcomes: Iterable[bool], combine: Combine) -> bool:
    outcomes = list(outcomes)
    return all(outcomes) if combine is Combine.ALL else any(outcomes)


def decide(evidence: Evidence, config: DetectorConfig) -> int:
    return int(combine_outcomes((evidence.satisfies(c) for c in config.criteria), config.combine))


def evaluate_criterion(
    criterion: Criterion, series: RawSeries, window: Window, config: DetectorConfig = DEFAULT_CONFIG
) -> bool:
    """Whether ``criterion`` holds over the epochs of ``window``.

    Elevation masking applies to C/N0 values only; excluded satellites are
    ignored by every criterion.
    """
    return accumulate(window.select(series), config).satisfies(criterion)


def _in_measurement(rel_t: float, cadence_s: float, config: DetectorConfig) -> bool:
    """Epoch starts after initialisation and its interval ends inside the window."""
    return rel_t >= config.init_duration_s and rel_t + cadence_s <= config.decision_time_s + TIME_EPS


def _covers_window(rel_t: float, cadence_s: float, config: DetectorConfig) -> bool:
    return rel_t + cadence_s >= config.decision_time_s - TIME_EPS


def measurement_epochs(series: RawSeries, config: DetectorConfig) -> list[Epoch]:
    """Epochs of the measurement window; raises SeriesTooShort if not covered."""
    if not series.epochs or not _covers_window(
        series.relative_time(series.epochs[-1]), series.cadence_s, config
    ):
        raise SeriesTooShort(
            f"series spans {series.span_s:g} s, need {config.decision_time_s:g} s"
        )
    return [
        e for e in series.epochs
        if _in_measurement(series.relative_time(e), series.cadence_s, config)
    ]


def measure(series: RawSeries, config: DetectorConfig = DEFAULT_CONFIG) -> Evidence:
    return accumulate(measurement_epochs(series, config), config)


def detect(series: RawSeries, config: DetectorConfig = DEFAULT_CONFIG) -> int:
    """1 if ``series`` was recorded in an attenuating environment, else 0."""
    return decide(measure(series, config), config)


class Phase(Enum):
    INITIALIZING = "initializing"
    MEASURING = "measuring"
    DECIDED = "decided"


@dataclass(frozen=True)
class DetectionState:
    """Immutable state of one online detection session."""

    phase: Phase = Phase.INITIALIZING
    elapsed_s: float = 0.0
    result: Optional[int] = None
    cadence_s: float = 1.0
    origin_s: Optional[float] = None
    last_s: Optional[float] = None
    evidence: Evidence = field(default_factory=Evidence)

    @classmethod
    def start(cls, cadence_s: float = 1.0) -> "DetectionState":
        return cls(cadence_s=cadence_s)

    @property
    def decided(self) -> bool:
        return self.phase is Phase.DECIDED


def online_step(state: DetectionState, epoch: Epoch, config: DetectorConfig = DEFAULT_CONFIG) -> DetectionState:
    """Feed one epoch; returns the next state.

    Once decided, further epochs leave the state unchanged.
    """
    if state.last_s is not None and not epoch.timestamp_s > state.last_s:
        raise OutOfOrderEpoch(f"epoch t={epoch.timestamp_s} after t={state.last_s}")
    if state.phase is Phase.DECIDED:
        return replace(state, last_s=epoch.timestamp_s)
    origin = epoch.timestamp_s if state.origin_s is None else state.origin_s
    rel_t = relative_time(epoch.timestamp_s, origin)
    cadence = state.cadence_s
    evidence = state.evidence
    if _in_measurement(rel_t, cadence, config):
        evidence = evidence.add(epoch, config)
    phase = Phase.MEASURING if rel_t >= config.init_duration_s else Phase.INITIALIZING
    result = None
    if _covers_window(rel_t, cadence, config):
        phase = Phase.DECIDED
        result = decide(evidence, config)
    return replace(
        state,
        phase=phase,
        elapsed_s=rel_t + cadence,
        result=result,
        origin_s=origin,
        last_s=epoch.timestamp_s,
        evidence=evidence,
    )


def run_online(epochs: Iterable[Epoch], config: DetectorConfig = DEFAULT_CONFIG, cadence_s: float = 1.0) -> DetectionState:
    state = DetectionState.start(cadence_s)
    for epoch in epochs:
        state = online_step(state, epoch, config)
    return state


@dataclass(frozen=True)
class AttenuationEstimate:
    level: AttenuationLevel
    metric_dbhz: float
    deficit_db: float


def attenuation_level(deficit_db: float, steps: tuple[float, float, float] = (5.0, 12.0, 20.0)) -> AttenuationLevel:
    moderate, strong, severe = steps
    if deficit_db < moderate:
        return AttenuationLevel.NONE
    if deficit_db < strong:
        return AttenuationLevel.MODERATE
    if deficit_db <= severe:
        return AttenuationLevel.STRONG
    return AttenuationLevel.SEVERE


def estimate_attenuation(
    series: RawSeries, config: DetectorConfig, open_sky_baseline_dbhz: float
) -> AttenuationEstimate:
    """Stepwise attenuation from the mean per-epoch strongest C/N0."""
    m = measure(series, config).mean_epoch_max
    deficit = open_sky_baseline_dbhz - m
    return AttenuationEstimate(attenuation_level(deficit, config.attenuation_steps_db), m, deficit)
