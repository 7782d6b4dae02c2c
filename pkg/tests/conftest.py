from __future__ import annotations

import numpy as np
import pytest

from gnssatt.model import ConstellationId, Epoch, RawSeries, SatelliteKey, SatelliteObservation

ACCEPTANCE_RESULTS: list[tuple[str, bool, str]] = []

KEY_POOL = [SatelliteKey(ConstellationId.GPS, s) for s in range(1, 13)] + [
    SatelliteKey(ConstellationId.GLONASS, s) for s in range(65, 71)
] + [SatelliteKey(ConstellationId.GALILEO, 3), SatelliteKey(ConstellationId.UNKNOWN, 200)]


def obs(const="GPS", svid=1, cn0=30.0, rho=True, chi=False, az=0.0, el=45.0, alm=False, eph=False):
    return SatelliteObservation(
        SatelliteKey(ConstellationId[const], svid), cn0 if rho else 0.0, az, el, rho, chi, alm, eph
    )


def random_observation(rng, key) -> SatelliteObservation:
    rho = bool(rng.random() < 0.8)
    cn0 = round(float(rng.uniform(5.0, 55.0)), 1) if rho else 0.0
    return SatelliteObservation(
        key,
        cn0,
        round(float(rng.uniform(0.0, 359.9)), 1),
        round(float(rng.uniform(-5.0, 90.0)), 1),
        rho,
        rho and bool(rng.random() < 0.6),
        bool(rng.random() < 0.5),
        bool(rng.random() < 0.5),
    )


def random_series(rng, n_epochs=None, cadence=1.0, jitter=0.0, max_sats=10) -> RawSeries:
    """Random valid series whose values are exact at GAD-CSV precision."""
    if n_epochs is None:
        n_epochs = int(rng.integers(1, 40))
    t = round(float(rng.uniform(0, 5)), 3)
    epochs = []
    for _ in range(n_epochs):
        k = int(rng.integers(0, max_sats + 1))
        keys = rng.choice(len(KEY_POOL), size=k, replace=False)
        epochs.append(Epoch(t, tuple(random_observation(rng, KEY_POOL[i]) for i in keys)))
        step = cadence * (1.0 + float(rng.uniform(-jitter, jitter)))
        t = round(t + step, 3)
    return RawSeries(tuple(epochs), cadence)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def record_acceptance():
    def record(name: str, passed: bool, detail: str = "") -> None:
        ACCEPTANCE_RESULTS.append((name, passed, detail))
        print(f"[{'PASS' if passed else 'FAIL'}] {name} {detail}")

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if passed else 'FAIL'}] {name} {detail}")
