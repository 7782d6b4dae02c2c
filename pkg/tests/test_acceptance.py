"""The nine primary acceptance criteria, one test each.

Every test prints a ``[PASS]``/``[FAIL]`` line (also collected into the
terminal summary) before asserting.
"""

import math
import operator
import time
from dataclasses import replace
from fractions import Fraction
from functools import reduce

import numpy as np

from conftest import KEY_POOL, random_series
from gnssatt.calibrate import LabeledDataset, calibrated_config, derive_threshold, evaluate_config
from gnssatt.detector import (
    DEFAULT_CONFIG,
    AvgCn0Below,
    Combine,
    DetectorConfig,
    DistinctSatsBelow,
    FixSatsBelow,
    MaxCn0Below,
    Metric,
    detect,
    evaluate_criterion,
    run_online,
)
from gnssatt.errors import EmptyWindow, ParseError, SeriesTooShort
from gnssatt.ingest import ParseReport, parse_gad_csv, parse_nmea, write_gad_csv
from gnssatt.model import ConstellationId, Epoch, RawSeries, SatelliteKey, SatelliteObservation
from gnssatt.stats import SatCount, Window, cn0_summary, ecdf, ks_distance, satcount_summary, time_to_first_fix
from gnssatt.synth import generate, preset


def test_criterion_1_reference_configuration_end_to_end(record_acceptance):
    start = time.perf_counter()
    wrong = []
    for name, expected in (("indoor_window", 1), ("deep_indoor", 1), ("open_sky", 0)):
        for seed in range(50):
            if detect(generate(preset(name, seed=seed)), DEFAULT_CONFIG) != expected:
                wrong.append((name, seed))
    elapsed = time.perf_counter() - start
    ok = not wrong and elapsed < 10.0
    record_acceptance("1 reference config end-to-end", ok, f"150 series, {len(wrong)} wrong, {elapsed:.2f}s")
    assert not wrong, wrong
    assert elapsed < 10.0


def _random_config(rng, keys):
    pool = [
        MaxCn0Below(float(rng.uniform(10, 50))),
        AvgCn0Below(float(rng.uniform(10, 50))),
        DistinctSatsBelow(int(rng.integers(0, 15))),
        FixSatsBelow(int(rng.integers(0, 10))),
    ]
    chosen = [pool[i] for i in rng.choice(4, size=int(rng.integers(1, 5)), replace=False)]
    excluded = {keys[i] for i in rng.choice(len(keys), size=int(rng.integers(0, 4)), replace=False)}
    return DetectorConfig(
        init_duration_s=float(rng.choice([0.0, float(rng.uniform(0, 30))])),
        measure_duration_s=float(rng.uniform(0.5, 40)),
        criteria=tuple(chosen),
        combine=Combine.ALL if rng.random() < 0.5 else Combine.ANY,
        elevation_mask_deg=None if rng.random() < 0.5 else float(rng.uniform(0, 40)),
        excluded_svids=excluded,
    )


def test_criterion_2_batch_online_equivalence(record_acceptance):
    rng = np.random.default_rng(2002)
    mismatches = decided = 0
    for _ in range(200):
        cadence = float(rng.choice([0.5, 1.0, 2.0]))
        jitter = float(rng.choice([0.0, 0.2]))
        config = _random_config(rng, KEY_POOL)
        # long enough to cover d0 + dm even if every step is shortened by the jitter
        n = math.ceil(config.decision_time_s / (cadence * (1.0 - jitter))) + int(rng.integers(1, 20))
        series = random_series(rng, n_epochs=n, cadence=cadence, jitter=jitter)
        state = run_online(series.epochs, config, cadence)
        expected = detect(series, config)
        decided += state.decided
        mismatches += not (state.decided and state.result == expected)
    ok = mismatches == 0 and decided == 200
    record_acceptance("2 batch/online equivalence", ok, f"200 cases, {decided} decided, {mismatches} mismatches")
    assert mismatches == 0 and decided == 200


def _oracle(values):
    n = len(values)
    exact = [Fraction(v) for v in values]
    mean = sum(exact) / n
    var = sum((v - mean) ** 2 for v in exact) / (n - 1) if n > 1 else Fraction(0)
    return float(mean), math.sqrt(var), min(values), max(values), n


def _close(a, b, rel=1e-9):
    return a == b or abs(a - b) <= rel * max(abs(a), abs(b))


def test_criterion_3_statistics_oracle(record_acceptance):
    rng = np.random.default_rng(3003)
    bad = checked = 0
    for _ in range(1000):
        series = random_series(rng, n_epochs=int(rng.integers(5, 60)), jitter=0.1)
        window = Window(float(rng.uniform(-2, 30)), float(rng.uniform(1, 40)))
        t0 = series.epochs[0].timestamp_s
        inside = [e for e in series.epochs if window.start_s <= round(e.timestamp_s - t0, 9) < window.end_s]
        samples = {
            "cn0": [o.cn0_dbhz for e in inside for o in e.observations if o.signal_present],
            "avail": [float(sum(o.signal_present for o in e.observations)) for e in inside],
            "fix": [float(sum(o.used_in_fix for o in e.observations)) for e in inside],
        }
        calls = {
            "cn0": lambda: cn0_summary(series, window),
            "avail": lambda: satcount_summary(series, window, SatCount.AVAILABLE),
            "fix": lambda: satcount_summary(series, window, SatCount.USED_IN_FIX),
        }
        for name, values in samples.items():
            checked += 1
            try:
                got = calls[name]()
            except EmptyWindow:
                bad += bool(values)
                continue
            if not values:
                bad += 1
                continue
            mean, std, lo, hi, n = _oracle(values)
            ok = (
                got.n == n and got.min == lo and got.max == hi
                and _close(got.mean, mean) and _close(got.std_dev, std)
            )
            bad += not ok
    record_acceptance("3 statistics oracle", bad == 0, f"1000 windows, {checked} summaries, {bad} mismatches")
    assert bad == 0


def test_criterion_4_ttff_phenomenology(record_acceptance):
    outdoor = [time_to_first_fix(generate(preset("open_sky", seed=s))) for s in range(20)]
    indoor = [time_to_first_fix(generate(preset("indoor_window", seed=s))) for s in range(20)]
    ok_out = all(t is not None and t < 60 for t in outdoor)
    ok_in = all(t is None or t > 300 for t in indoor)
    detail = f"open sky max {max(t for t in outdoor if t is not None)}s, indoor fixes {sum(t is not None for t in indoor)}/20"
    record_acceptance("4 TTFF phenomenology", ok_out and ok_in, detail)
    assert ok_out, outdoor
    assert ok_in, indoor


def test_criterion_5_calibration_recovery(record_acceptance):
    def cls(attenuation):
        out = []
        for seed in range(10):
            spec = preset("open_sky", seed=seed)
            out.append(generate(replace(spec, channel=replace(spec.channel, attenuation_db=attenuation))))
        return out

    data = LabeledDataset(cls(16.0), cls(0.0))
    result = derive_threshold(data, DEFAULT_CONFIG, Metric.MAX_CN0)
    between = max(result.attenuating_values) < result.threshold < min(result.open_values)
    confusion = evaluate_config(data, calibrated_config(DEFAULT_CONFIG, result))
    ok = result.separable and between and confusion.fp == 0 and confusion.fn == 0
    record_acceptance(
        "5 calibration recovery", ok,
        f"threshold {result.threshold:.2f} in ({max(result.attenuating_values)}, {min(result.open_values)}), "
        f"fp={confusion.fp} fn={confusion.fn}",
    )
    assert result.separable and between
    assert confusion.fp == confusion.fn == 0


def test_criterion_6_round_trip_fidelity(record_acceptance):
    rng = np.random.default_rng(6006)
    failures = 0
    for _ in range(500):
        series = random_series(rng, jitter=float(rng.choice([0.0, 0.3])))
        text = write_gad_csv(series)
        back = parse_gad_csv(text).series
        failures += not (back == series and write_gad_csv(series) == text and write_gad_csv(back) == text)
    record_acceptance("6 round-trip fidelity", failures == 0, f"500 series, {failures} failures")
    assert failures == 0


def test_criterion_7_ks_properties(record_acceptance):
    rng = np.random.default_rng(7007)
    problems = []
    if ks_distance(ecdf([3.0, 1.0, 2.0, 2.0]), ecdf([2.0, 1.0, 2.0, 3.0])) != 0.0:
        problems.append("identical")
    if ks_distance(ecdf([0.0, 1.0]), ecdf([10.0, 11.0])) != 1.0:
        problems.append("disjoint")
    worst = 0.0
    for _ in range(200):
        a = np.round(rng.normal(30, 5, size=int(rng.integers(1, 40))), int(rng.integers(0, 2))).tolist()
        b = np.round(rng.normal(32, 6, size=int(rng.integers(1, 40))), int(rng.integers(0, 2))).tolist()
        fa, fb = ecdf(a), ecdf(b)
        d = ks_distance(fa, fb)
        if d != ks_distance(fb, fa):
            problems.append("symmetry")
        exhaustive = max(
            abs(sum(u <= x for u in a) / len(a) - sum(u <= x for u in b) / len(b)) for x in set(a) | set(b)
        )
        worst = max(worst, abs(d - exhaustive))
    ok = not problems and worst <= 1e-12
    record_acceptance("7 KS properties", ok, f"200 pairs, max deviation {worst:.1e}, problems {problems}")
    assert not problems
    assert worst <= 1e-12


def test_criterion_8_filter_soundness(record_acceptance):
    rng = np.random.default_rng(8008)
    pseudolite = SatelliteKey(ConstellationId.UNKNOWN, 250)
    low = SatelliteKey(ConstellationId.GALILEO, 36)
    changed = checks = 0
    for _ in range(100):
        series = random_series(rng, n_epochs=int(rng.integers(20, 60)))
        mask = float(rng.uniform(5, 30))
        base = DetectorConfig(5.0, 15.0, (MaxCn0Below(30.0),), excluded_svids={pseudolite}, elevation_mask_deg=mask)
        injected = []
        for e in series.epochs:
            extra = (
                SatelliteObservation(pseudolite, round(float(rng.uniform(0, 64)), 1), 10.0, 45.0, True, True),
                SatelliteObservation(
                    low, round(float(rng.uniform(0, 64)), 1), 20.0, round(float(rng.uniform(-5, mask - 0.1)), 1),
                    True, False,
                ),
            )
            injected.append(Epoch(e.timestamp_s, e.observations + extra))
        noisy = RawSeries(tuple(injected), series.cadence_s)
        for criterion in (MaxCn0Below(25.0), MaxCn0Below(35.0), AvgCn0Below(25.0), AvgCn0Below(35.0)):
            config = base.with_criteria(criterion)
            checks += 1
            window = Window(float(rng.uniform(0, 20)), float(rng.uniform(1, 40)))
            changed += evaluate_criterion(criterion, series, window, config) != evaluate_criterion(
                criterion, noisy, window, config
            )
            try:
                changed += detect(series, config) != detect(noisy, config)
            except SeriesTooShort:
                pass
    record_acceptance("8 filter soundness", changed == 0, f"100 series, {checks} criteria, {changed} changed")
    assert changed == 0


def _mutate(rng, data: bytes) -> bytes:
    buf = bytearray(data)
    alphabet = b"0123456789,.*$-\r\n\x00\xffGPSN"
    for _ in range(int(rng.integers(1, 8))):
        op = int(rng.integers(0, 6))
        pos = int(rng.integers(0, len(buf) + 1))
        if op == 0 and buf:
            buf[min(pos, len(buf) - 1)] = int(rng.integers(0, 256))
        elif op == 1:
            buf[pos:pos] = bytes([alphabet[int(rng.integers(0, len(alphabet)))]])
        elif op == 2 and buf:
            del buf[pos:pos + int(rng.integers(1, 20))]
        elif op == 3 and buf:
            end = min(len(buf), pos + int(rng.integers(1, 80)))
            buf[pos:pos] = buf[pos:end]
        elif op == 4:
            lines = bytes(buf).split(b"\n")
            i, j = rng.integers(0, len(lines), size=2)
            lines[i], lines[j] = lines[j], lines[i]
            buf = bytearray(b"\n".join(lines))
        else:
            buf = buf[: int(rng.integers(0, len(buf) + 1))]
    return bytes(buf)


def _nmea_seed() -> bytes:
    def s(body):
        return f"${body}*{reduce(operator.xor, body.encode(), 0):02X}"

    lines = []
    for k in range(4):
        hhmmss = f"1235{10 + k:02d}.00"
        lines += [
            s(f"GPGGA,{hhmmss},4807.038,N,01131.000,E,1,04,0.9,545.4,M,46.9,M,,"),
            s("GPGSV,2,1,05,05,45,120,38,12,30,200,32,17,60,045,41,24,15,300,25"),
            s("GPGSV,2,2,05,40,20,150,"),
            s("GLGSV,1,1,01,70,35,010,29"),
            s("GNGSA,A,3,05,12,17,,,,,,,,,,1.8,0.9,1.5,1"),
            s(f"GPRMC,{hhmmss},A,4807.038,N,01131.000,E,0.0,0.0,230394,,,A"),
        ]
    return ("\r\n".join(lines) + "\r\n").encode()


def test_criterion_9_fuzz_totality(record_acceptance):
    rng = np.random.default_rng(9009)
    gad_seed = write_gad_csv(random_series(np.random.default_rng(1), n_epochs=6, max_sats=5)).encode()
    nmea_seed = _nmea_seed()
    crashes = []
    outcomes = {"report": 0, "declared": 0}
    for name, parser, seed in (("gadcsv", parse_gad_csv, gad_seed), ("nmea", parse_nmea, nmea_seed)):
        for _ in range(10_000):
            data = _mutate(rng, seed)
            try:
                result = parser(data)
            except ParseError:
                outcomes["declared"] += 1
                continue
            except Exception as exc:  # anything undeclared is a failure
                crashes.append((name, type(exc).__name__, data[:60]))
                continue
            if isinstance(result, ParseReport):
                outcomes["report"] += 1
            else:
                crashes.append((name, "unexpected return", data[:60]))
    ok = not crashes
    record_acceptance("9 fuzz totality", ok, f"20000 inputs, {outcomes}, {len(crashes)} crashes")
    assert not crashes, crashes[:5]
