"""Command line interface.

Reports (JSON, GAD-CSV, scenario files) go to standard output, diagnostics
to standard error.  Exit codes:

    0  success
    1  I/O failure
    2  input could not be parsed
    3  statistics window is empty
    4  series shorter than initialisation + measurement
    5  invalid configuration, scenario or calibration manifest
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Optional

from . import calibrate as cal
from . import ingest, stats, synth
from .detector import (
    Combine,
    Criterion,
    DetectionState,
    DetectorConfig,
    Evidence,
    Metric,
    attenuation_level,
    decide,
    measure,
    online_step,
)
from .errors import (
    EmptyClass,
    EmptyInput,
    EmptyWindow,
    InvalidConfig,
    InvalidObservation,
    InvalidSpec,
    ParseError,
    SeriesTooShort,
)
from .model import RawSeries, SatelliteKey, fix_count

log = logging.getLogger("gnssatt")

EXIT_OK = 0
EXIT_IO = 1
EXIT_PARSE = 2
EXIT_EMPTY_WINDOW = 3
EXIT_TOO_SHORT = 4
EXIT_CONFIG = 5

EXIT_CODES = {
    OSError: EXIT_IO,
    ParseError: EXIT_PARSE,
    EmptyWindow: EXIT_EMPTY_WINDOW,
    SeriesTooShort: EXIT_TOO_SHORT,
    InvalidConfig: EXIT_CONFIG,
    InvalidSpec: EXIT_CONFIG,
    EmptyClass: EXIT_CONFIG,
}

NMEA_SUFFIXES = {".nmea", ".nma", ".gps"}


def _emit(doc) -> None:
    sys.stdout.write(json.dumps(doc, indent=2) + "\n")


def _input_format(path: str, fmt: Optional[str]) -> str:
    if fmt:
        return fmt
    return "nmea" if Path(path).suffix.lower() in NMEA_SUFFIXES else "gadcsv"


def _load(path: str, fmt: Optional[str], cadence: float = 1.0) -> RawSeries:
    fmt = _input_format(path, fmt)
    report = ingest.parse_file(path, fmt, cadence)
    _log_report(path, report.lines_total, report.lines_skipped, report.warnings)
    return report.series


def _log_report(path, total, skipped, warnings) -> None:
    log.info("%s: %d lines, %d skipped", path, total, skipped)
    for line_no, reason in warnings[:20]:
        log.warning("%s:%d: %s", path, line_no, reason)
    if len(warnings) > 20:
        log.warning("%s: %d more warnings", path, len(warnings) - 20)


# ---------------------------------------------------------------------------
# detector configuration


def _parse_exclude(text: str) -> frozenset[SatelliteKey]:
    try:
        return frozenset(SatelliteKey.parse(tok) for tok in text.split(",") if tok.strip())
    except (ValueError, InvalidObservation) as exc:
        raise InvalidConfig(f"--exclude: {exc}") from None


def config_to_dict(config: DetectorConfig) -> dict:
    return {
        "d0": config.init_duration_s,
        "dm": config.measure_duration_s,
        "criteria": [{"metric": c.metric.value, "threshold": c.threshold} for c in config.criteria],
        "combine": config.combine.value,
        "elev_mask": config.elevation_mask_deg,
        "exclude": sorted(str(k) for k in config.excluded_svids),
        "attenuation_steps_db": list(config.attenuation_steps_db),
    }


def config_from_dict(doc: dict) -> DetectorConfig:
    try:
        kwargs = {}
        if "d0" in doc:
            kwargs["init_duration_s"] = float(doc["d0"])
        if "dm" in doc:
            kwargs["measure_duration_s"] = float(doc["dm"])
        if "criteria" in doc:
            kwargs["criteria"] = tuple(
                Criterion(Metric(c["metric"]), float(c["threshold"])) for c in doc["criteria"]
            )
        if "combine" in doc:
            kwargs["combine"] = Combine(doc["combine"])
        if doc.get("elev_mask") is not None:
            kwargs["elevation_mask_deg"] = float(doc["elev_mask"])
        if "exclude" in doc:
            kwargs["excluded_svids"] = _parse_exclude(",".join(doc["exclude"]))
        if "attenuation_steps_db" in doc:
            kwargs["attenuation_steps_db"] = tuple(float(v) for v in doc["attenuation_steps_db"])
        return DetectorConfig(**kwargs)
    except (KeyError, TypeError, ValueError, AttributeError) as exc:
        if isinstance(exc, InvalidConfig):
            raise
        raise InvalidConfig(f"bad config: {exc}") from None


def _build_config(args) -> tuple[DetectorConfig, bool]:
    """Config from --config plus flag overrides; second item: device calibrated."""
    doc: dict = {}
    calibrated = False
    if getattr(args, "config", None):
        try:
            doc = json.loads(Path(args.config).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{args.config}: {exc}") from None
        if not isinstance(doc, dict):
            raise InvalidConfig(f"{args.config}: expected a JSON object")
        calibrated = bool(doc.get("device_calibrated", False))
    if args.d0 is not None:
        doc["d0"] = args.d0
    if args.dm is not None:
        doc["dm"] = args.dm
    flag_criteria = []
    for attr, metric in (
        ("max_cn0", Metric.MAX_CN0),
        ("avg_cn0", Metric.AVG_CN0),
        ("min_sats", Metric.DISTINCT_SATS),
        ("min_fix_sats", Metric.FIX_SATS),
    ):
        value = getattr(args, attr, None)
        if value is not None:
            flag_criteria.append({"metric": metric.value, "threshold": value})
    if flag_criteria:
        doc["criteria"] = flag_criteria
        calibrated = False
    if getattr(args, "combine", None):
        doc["combine"] = args.combine
    if args.elev_mask is not None:
        doc["elev_mask"] = args.elev_mask
    if args.exclude:
        doc["exclude"] = [tok for tok in args.exclude.split(",") if tok.strip()]
    return config_from_dict(doc), calibrated


def _add_config_flags(p: argparse.ArgumentParser, criteria: bool = True) -> None:
    g = p.add_argument_group("detector configuration")
    g.add_argument("--config", help="JSON detector configuration file")
    g.add_argument("--d0", type=float, help="initialisation duration, s (default 100)")
    g.add_argument("--dm", type=float, help="measurement duration, s (default 100)")
    if criteria:
        g.add_argument("--max-cn0", type=float, help="attenuating if every epoch max C/N0 <= value")
        g.add_argument("--avg-cn0", type=float, help="attenuating if pooled mean C/N0 < value")
        g.add_argument("--min-sats", type=float, help="attenuating if distinct satellites < value")
        g.add_argument("--min-fix-sats", type=float, help="attenuating if fix satellites < value")
        g.add_argument("--combine", choices=["all", "any"])
    g.add_argument("--elev-mask", type=float, help="ignore C/N0 below this elevation, deg")
    g.add_argument("--exclude", help="satellites to ignore, CONST:SVID,...")


# ---------------------------------------------------------------------------
# commands


def cmd_convert(args) -> int:
    series = _load(args.input, args.format, args.cadence)
    text = ingest.write_gad_csv(series)
    if args.output in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(args.output).write_text(text, encoding="utf-8", newline="\n")
    return EXIT_OK


def _summary(fn, *a):
    try:
        return fn(*a).as_dict()
    except EmptyWindow:
        return None


def cmd_stats(args) -> int:
    series = _load(args.input, args.format, args.cadence)
    try:
        window = stats.Window(args.window_start, args.window_dur)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    epochs = window.select(series)
    if not epochs:
        raise EmptyWindow(f"no epoch in window [{window.start_s}, {window.end_s})")
    ttff = stats.time_to_first_fix(series)
    _emit({
        "input": args.input,
        "window": {"start_s": window.start_s, "duration_s": window.duration_s, "epochs": len(epochs)},
        "cn0_dbhz": _summary(stats.cn0_summary, series, window),
        "satellites_available": _summary(stats.satcount_summary, series, window, stats.SatCount.AVAILABLE),
        "satellites_used_in_fix": _summary(stats.satcount_summary, series, window, stats.SatCount.USED_IN_FIX),
        "distinct_satellites": stats.distinct_satellites(series, window),
        "ttff_s": ttff,
    })
    if args.epochs_csv:
        with open(args.epochs_csv, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t_s", "available", "used_in_fix", "max_cn0_dbhz"])
            for e in series.epochs:
                m = e.max_cn0
                writer.writerow([
                    f"{series.relative_time(e):.3f}", e.satellite_count, e.fix_count,
                    "" if m is None else f"{m:.1f}",
                ])
    return EXIT_OK


def detect_report(
    input_name: str,
    config: DetectorConfig,
    evidence: Evidence,
    ttff: Optional[float],
    baseline: Optional[float],
    calibrated: bool,
    mode: str,
) -> dict:
    """Build the detection report; the decision is derived from the echoed outcomes."""
    outcomes = [
        {
            "metric": c.metric.value,
            "threshold": c.threshold,
            "value": evidence.value(c.metric),
            "satisfied": evidence.satisfies(c),
        }
        for c in config.criteria
    ]
    attenuation = None
    if baseline is not None:
        m = evidence.mean_epoch_max
        deficit = baseline - m
        attenuation = {
            "baseline_dbhz": baseline,
            "level": attenuation_level(deficit, config.attenuation_steps_db).value,
            "metric_dbhz": m,
            "deficit_db": deficit,
        }
    return {
        "input": input_name,
        "mode": mode,
        "device_calibrated": calibrated,
        "config": config_to_dict(config),
        "decision": decide(evidence, config),
        "criteria": outcomes,
        "window": {
            "start_s": config.init_duration_s,
            "duration_s": config.measure_duration_s,
            "epochs": evidence.epochs,
            "max_cn0_dbhz": evidence.max_cn0,
            "mean_cn0_dbhz": evidence.mean_cn0,
            "distinct_satellites": len(evidence.keys),
            "max_fix_satellites": evidence.max_fix,
        },
        "ttff_s": ttff,
        "attenuation": attenuation,
    }


def cmd_detect(args) -> int:
    config, calibrated = _build_config(args)
    if args.stream:
        return _detect_stream(args, config, calibrated)
    series = _load(args.input, args.format, args.cadence)
    evidence = measure(series, config)
    _emit(detect_report(
        args.input, config, evidence, stats.time_to_first_fix(series),
        args.baseline, calibrated, "batch",
    ))
    return EXIT_OK


def _detect_stream(args, config: DetectorConfig, calibrated: bool) -> int:
    fmt = _input_format(args.input, args.format)
    source = sys.stdin if args.input == "-" else open(args.input, encoding="utf-8", errors="replace")
    warnings: list = []
    try:
        if fmt == "nmea":
            epochs = ingest.iter_nmea_epochs(source)
        else:
            epochs = ingest.iter_gad_epochs(source, args.cadence, warnings)
        state = DetectionState.start(args.cadence)
        ttff = None
        seen = 0
        for epoch in epochs:
            seen += 1
            state = online_step(state, epoch, config)
            if ttff is None and fix_count(epoch) > 0:
                ttff = round(epoch.timestamp_s - state.origin_s, 9)
            sys.stdout.write(json.dumps({
                "t_s": epoch.timestamp_s, "phase": state.phase.value,
                "elapsed_s": state.elapsed_s, "result": state.result,
            }) + "\n")
            sys.stdout.flush()
            if state.decided:
                break
    finally:
        if source is not sys.stdin:
            source.close()
    if not seen:
        raise EmptyInput(f"{args.input}: no epoch in stream", warnings)
    if not state.decided:
        raise SeriesTooShort(
            f"stream ended after {state.elapsed_s:g} s, need {config.decision_time_s:g} s"
        )
    sys.stdout.write(json.dumps(detect_report(
        args.input, config, state.evidence, ttff, args.baseline, calibrated, "stream",
    )) + "\n")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    config, _ = _build_config(args)
    try:
        entries = cal.read_manifest(args.manifest)
    except ValueError as exc:
        raise InvalidConfig(str(exc)) from None
    loaded = [(label, _load(str(path), args.format, args.cadence), str(path)) for label, path in entries]
    data = cal.dataset_from_entries(loaded)
    metric = Metric(args.metric)
    result = cal.derive_threshold(data, config, metric)
    tuned = cal.calibrated_config(config, result)
    confusion = cal.evaluate_config(data, tuned)
    files = [
        {"label": label, "path": tag, "value": cal.extract_metric(series, config, metric)}
        for label, series, tag in loaded
    ]
    _emit({
        "manifest": args.manifest,
        "metric": metric.value,
        "threshold": result.threshold,
        "margin": result.margin,
        "separable": result.separable,
        "ks": result.ks,
        "confusion": confusion.as_dict(),
        "files": files,
        "config": config_to_dict(tuned),
    })
    if args.write_config:
        doc = config_to_dict(tuned)
        doc["device_calibrated"] = True
        Path(args.write_config).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    return EXIT_OK


def cmd_synth(args) -> int:
    if args.spec:
        try:
            spec = synth.parse_scenario(Path(args.spec).read_text(encoding="utf-8"))
        except UnicodeDecodeError as exc:
            raise InvalidSpec(f"{args.spec}: {exc}") from None
        spec = synth.with_seed(spec, args.seed)
        if args.duration is not None:
            spec = replace(spec, duration_s=args.duration)
    elif args.preset:
        kwargs = {}
        if args.duration is not None:
            kwargs["duration_s"] = args.duration
        spec = synth.preset(args.preset, args.seed or 0, **kwargs)
    else:
        raise InvalidSpec("give a preset name or --spec FILE")
    series = synth.generate(spec)
    text = ingest.write_gad_csv(series)
    Path(args.output).write_text(text, encoding="utf-8", newline="\n")
    sys.stdout.write(synth.format_scenario(spec))
    return EXIT_OK


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gnssatt", description="Detect attenuating environments from GNSS status logs."
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log parse summaries")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_input(p, optional=False):
        if optional:
            p.add_argument("input", nargs="?", default="-", help="input log ('-' for stdin)")
        else:
            p.add_argument("input", help="input log")
        p.add_argument("--format", choices=["nmea", "gadcsv"], help="input format (default: by suffix)")
        p.add_argument("--cadence", type=float, default=1.0, help="nominal epoch interval, s")

    p = sub.add_parser("convert", help="convert a log to GAD-CSV")
    with_input(p)
    p.add_argument("-o", "--output", help="output GAD-CSV path (default stdout)")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("stats", help="windowed C/N0 and satellite statistics")
    with_input(p)
    p.add_argument("--window-start", type=float, default=100.0, help="s from series start (default 100)")
    p.add_argument("--window-dur", type=float, default=100.0, help="window length, s (default 100)")
    p.add_argument("--epochs-csv", help="also write per-epoch t, S, X, max C/N0 to this CSV")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("detect", help="decide whether a log was recorded in an attenuating environment")
    with_input(p, optional=True)
    _add_config_flags(p)
    p.add_argument("--baseline", type=float, help="open-sky C/N0 baseline for the attenuation estimate")
    p.add_argument("--stream", action="store_true", help="process epochs incrementally")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("calibrate", help="derive a threshold from a labelled manifest")
    p.add_argument("manifest", help="text file of 'att,<path>' / 'open,<path>' lines")
    p.add_argument("--metric", choices=[m.value for m in Metric], default=Metric.MAX_CN0.value)
    p.add_argument("--format", choices=["nmea", "gadcsv"])
    p.add_argument("--cadence", type=float, default=1.0)
    p.add_argument("--write-config", help="write the calibrated detector config (JSON) here")
    _add_config_flags(p, criteria=False)
    p.set_defaults(func=cmd_calibrate)

    p = sub.add_parser("synth", help="generate a synthetic GAD-CSV log")
    p.add_argument("preset", nargs="?", choices=[k.name for k in synth.Preset] + [k.value for k in synth.Preset])
    p.add_argument("--spec", help="scenario file instead of a preset")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--duration", type=float, help="override scenario duration, s")
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        if getattr(args, "cadence", 1.0) <= 0:
            raise InvalidConfig(f"--cadence must be positive, got {args.cadence}")
        return args.func(args)
    except tuple(EXIT_CODES) as exc:
        code = next(c for t, c in EXIT_CODES.items() if isinstance(exc, t))
        print(f"gnssatt: {exc}", file=sys.stderr)
        return code


if __name__ == "__main__":
    sys.exit(main())
