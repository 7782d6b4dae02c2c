"""Windowed statistics over a :class:`~gnssatt.model.RawSeries`.

Window start times are measured from the first epoch of the series and are
half-open, so adjacent windows partition a series.
"""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EmptySample, EmptyWindow
from .model import Epoch, RawSeries, SatelliteKey, fix_count, satellite_count


@dataclass(frozen=True)
class Window:
    start_s: float
    duration_s: float

    def __post_init__(self):
        if not (math.isfinite(self.start_s) and math.isfinite(self.duration_s)):
            raise ValueError("window bounds must be finite")
        if self.duration_s <= 0:
            raise ValueError(f"window duration must be positive, got {self.duration_s}")

    @property
    def end_s(self) -> float:
        return self.start_s + self.duration_s

    def contains(self, rel_t: float) -> bool:
        return self.start_s <= rel_t < self.end_s

    def select(self, series: RawSeries) -> list[Epoch]:
        return [e for e in series.epochs if self.contains(series.relative_time(e))]


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std_dev: float
    min: float
    max: float
    n: int

    def as_dict(self) -> dict:
        return {"mean": self.mean, "std_dev": self.std_dev, "min": self.min, "max": self.max, "n": self.n}


class SatCount(Enum):
    AVAILABLE = "available"
    USED_IN_FIX = "used_in_fix"


def summarize(values: Sequence[float]) -> SummaryStats:
    """Mean, sample standard deviation (n-1), min and max of ``values``."""
    n = len(values)
    if n == 0:
        raise EmptyWindow("no samples")
    mean = math.fsum(values) / n
    if n == 1:
        std = 0.0
    else:
        std = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
    lo, hi = min(values), max(values)
    # keep min <= mean <= max despite rounding
    return SummaryStats(min(max(mean, lo), hi), std, lo, hi, n)


def cn0_samples(epochs: Iterable[Epoch]) -> list[float]:
    return [o.cn0_dbhz for e in epochs for o in e.observations if o.signal_present]


def cn0_summary(series: RawSeries, window: Window) -> SummaryStats:
    """Pooled C/N0 statistics of every received satellite in the window."""
    values = cn0_samples(window.select(series))
    if not values:
        raise EmptyWindow(f"no received satellite in {window}")
    return summarize(values)


def satcount_summary(series: RawSeries, window: Window, which: SatCount = SatCount.AVAILABLE) -> SummaryStats:
    """Statistics of the per-epoch satellite count (available or used in fix)."""
    counter = satellite_count if SatCount(which) is SatCount.AVAILABLE else fix_count
    epochs = window.select(series)
    if not epochs:
        raise EmptyWindow(f"no epoch in {window}")
    return summarize([float(counter(e)) for e in epochs])


def time_to_first_fix(series: RawSeries) -> Optional[float]:
    """Seconds from the first epoch to the first epoch with a fix, or None."""
    for epoch in series.epochs:
        if fix_count(epoch) > 0:
            return series.relative_time(epoch)
    return None


def distinct_keys(epochs: Iterable[Epoch]) -> set[SatelliteKey]:
    return {o.key for e in epochs for o in e.observations if o.signal_present}


def distinct_satellites(series: RawSeries, window: Window) -> int:
    """Number of different satellites received at least once in the window."""
    return len(distinct_keys(window.select(series)))


class Ecdf:
    """Empirical CDF of a finite sample, right-continuous at sample points."""

    def __init__(self, values: Iterable[float]):
        data = np.sort(np.asarray(list(values), dtype=float))
        if data.size == 0:
            raise EmptySample("ECDF of an empty sample")
        if not np.all(np.isfinite(data)):
            raise ValueError("ECDF values must be finite")
        self.values = data
        self.n = int(data.size)
        self.probabilities = np.arange(1, self.n + 1) / self.n

    def __call__(self, x) -> float:
        """P(X <= x)."""
        return bisect.bisect_right(self.values, x) / self.n

    def below(self, x) -> float:
        """P(X < x)."""
        return bisect.bisect_left(self.values, x) / self.n

    def evaluate(self, xs) -> np.ndarray:
        return np.searchsorted(self.values, np.asarray(xs, dtype=float), side="right") / self.n

    def __repr__(self) -> str:
        return f"Ecdf(n={self.n})"


def ecdf(values: Iterable[float]) -> Ecdf:
    return Ecdf(values)


def ks_distance(a: Ecdf, b: Ecdf) -> float:
    """Two-sample Kolmogorov-Smirnov statistic sup |F_a - F_b|."""
    return ks_split(a, b)[0]


def ks_split(a: Ecdf, b: Ecdf) -> tuple[float, float]:
    """Return (distance, x) where x is the first union point attaining it."""
    points = np.union1d(a.values, b.values)
    # integer counts scaled to a common denominator keep ties exact
    ca = np.searchsorted(a.values, points, side="right").astype(np.int64)
    cb = np.searchsorted(b.values, points, side="right").astype(np.int64)
    diff = np.abs(ca * b.n - cb * a.n)
    i = int(np.argmax(diff))
    return float(diff[i]) / (a.n * b.n), float(points[i])
