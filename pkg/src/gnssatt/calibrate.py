"""Derive device-specific detection thresholds from labelled recordings.

Recordings made in known attenuating environments and in known open
environments are each reduced to one scalar per recording (the value a
criterion would threshold).  If the two classes do not overlap, the threshold
is placed in the middle of the gap; otherwise it falls back to the split point
where the two empirical CDFs differ most.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from .detector import Criterion, DetectorConfig, Metric, detect, measure
from .errors import EmptyClass, SeriesTooShort
from .model import RawSeries
from .stats import Ecdf, ks_split

LABEL_ATTENUATING = "att"
LABEL_OPEN = "open"


@dataclass
class LabeledDataset:
    attenuating: list[RawSeries]
    open: list[RawSeries]
    attenuating_tags: list[Optional[str]] = field(default_factory=list)
    open_tags: list[Optional[str]] = field(default_factory=list)


@dataclass(frozen=True)
class CalibrationResult:
    metric: Metric
    threshold: float
    margin: float
    separable: bool
    ks: float
    attenuating_values: tuple[float, ...] = ()
    open_values: tuple[float, ...] = ()

    def criterion(self) -> Criterion:
        return Criterion(self.metric, self.threshold)


@dataclass(frozen=True)
class Confusion:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0
    skipped: int = 0

    def as_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "tn": self.tn, "fn": self.fn, "skipped": self.skipped}


def extract_metric(series: RawSeries, config: DetectorConfig, metric: Metric) -> float:
    """Scalar for ``metric`` over the measurement window of ``series``."""
    return measure(series, config).value(Metric(metric))


def derive_threshold(data: LabeledDataset, config: DetectorConfig, metric: Metric) -> CalibrationResult:
    if not data.attenuating or not data.open:
        raise EmptyClass("both the attenuating and the open class need at least one series")
    metric = Metric(metric)
    att = [extract_metric(s, config, metric) for s in data.attenuating]
    opn = [extract_metric(s, config, metric) for s in data.open]
    ks, split = ks_split(Ecdf(att), Ecdf(opn))
    hi_att, lo_open = max(att), min(opn)
    if hi_att < lo_open:
        threshold = (hi_att + lo_open) / 2.0
        margin = lo_open - hi_att
        separable = True
    else:
        threshold, margin, separable = split, 0.0, False
    return CalibrationResult(
        metric, threshold, margin, separable, ks, tuple(sorted(att)), tuple(sorted(opn))
    )


def evaluate_config(data: LabeledDataset, config: DetectorConfig) -> Confusion:
    """Confusion counts of ``detect`` on every labelled series.

    Series too short for the configured windows are skipped and counted.
    """
    tp = fp = tn = fn = skipped = 0
    for label, group in ((1, data.attenuating), (0, data.open)):
        for series in group:
            try:
                result = detect(series, config)
            except SeriesTooShort:
                skipped += 1
                continue
            if label and result:
                tp += 1
            elif label:
                fn += 1
            elif result:
                fp += 1
            else:
                tn += 1
    return Confusion(tp, fp, tn, fn, skipped)


def calibrated_config(config: DetectorConfig, result: CalibrationResult) -> DetectorConfig:
    """``config`` with its criteria replaced by the calibrated one."""
    return config.with_criteria(result.criterion())


def read_manifest(path) -> list[tuple[str, Path]]:
    """Read ``label,path`` lines; relative paths resolve against the manifest.

    Blank lines and lines starting with ``#`` are ignored.
    """
    path = Path(path)
    entries = []
    for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        label, sep, target = line.partition(",")
        label = label.strip()
        if not sep or label not in (LABEL_ATTENUATING, LABEL_OPEN):
            raise ValueError(f"{path}:{line_no}: expected 'att,<path>' or 'open,<path>'")
        entries.append((label, path.parent / target.strip()))
    return entries


def dataset_from_entries(entries: Sequence[tuple[str, RawSeries, Optional[str]]]) -> LabeledDataset:
    data = LabeledDataset([], [])
    for label, series, tag in entries:
        if label == LABEL_ATTENUATING:
            data.attenuating.append(series)
            data.attenuating_tags.append(tag)
        else:
            data.open.append(series)
            data.open_tags.append(tag)
    return data
