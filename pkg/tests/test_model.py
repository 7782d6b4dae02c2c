import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import obs
from gnssatt.errors import InvalidObservation
from gnssatt.model import (
    ConstellationId,
    Epoch,
    RawSeries,
    SatelliteKey,
    SatelliteObservation,
    epoch_max_cn0,
    fix_count,
    satellite_count,
)
from gnssatt.synth import ChannelModel, SatTrack, ScenarioSpec, generate


@pytest.mark.parametrize("const", list(ConstellationId))
def test_constellation_round_trip(const):
    assert ConstellationId.parse(const.format()) is const


def test_constellation_rejects_unknown_token():
    with pytest.raises(ValueError):
        ConstellationId.parse("NAVIC")


def test_satellite_key_equality_and_parse():
    a = SatelliteKey(ConstellationId.GPS, 5)
    assert a == SatelliteKey.parse("GPS:5")
    assert a != SatelliteKey(ConstellationId.GLONASS, 5)
    assert a != SatelliteKey(ConstellationId.GPS, 6)
    with pytest.raises(InvalidObservation):
        SatelliteKey(ConstellationId.GPS, 0)


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(cn0=65.0),
        dict(cn0=-1.0),
        dict(az=360.0),
        dict(el=91.0),
        dict(cn0=float("nan")),
    ],
)
def test_observation_rejects_out_of_range(kwargs):
    with pytest.raises(InvalidObservation):
        obs(**kwargs)


def test_observation_flag_invariants():
    key = SatelliteKey(ConstellationId.GPS, 1)
    with pytest.raises(InvalidObservation):
        SatelliteObservation(key, 0.0, 0.0, 0.0, signal_present=False, used_in_fix=True)
    with pytest.raises(InvalidObservation):
        SatelliteObservation(key, 20.0, 0.0, 0.0, signal_present=False, used_in_fix=False)


def test_epoch_rejects_duplicate_key():
    with pytest.raises(InvalidObservation):
        Epoch(0.0, (obs(svid=3), obs(svid=3, cn0=20.0)))


def test_series_requires_increasing_time_and_positive_cadence():
    with pytest.raises(InvalidObservation):
        RawSeries((Epoch(1.0), Epoch(1.0)))
    with pytest.raises(InvalidObservation):
        RawSeries((), cadence_s=0.0)


def test_empty_epoch_counts():
    e = Epoch(0.0)
    assert satellite_count(e) == 0
    assert fix_count(e) == 0
    assert epoch_max_cn0(e) is None


def test_counts_by_definition():
    e = Epoch(0.0, (obs(svid=1), obs(svid=2), obs(svid=3, rho=False)))
    assert satellite_count(e) == 2
    seven = [obs(svid=i, chi=i <= 5) for i in range(1, 8)]
    assert fix_count(Epoch(0.0, tuple(seven))) == 5


def test_max_cn0_by_definition():
    e = Epoch(0.0, (obs(svid=1, cn0=17.0), obs(svid=2, cn0=22.5), obs(svid=3, cn0=28.0)))
    assert epoch_max_cn0(e) == 28.0


def _zenith_scenario(n_sats, attenuation=0.0, noise=0.0):
    tracks = tuple(
        SatTrack(SatelliteKey(ConstellationId.GPS, i + 1), 80.0, 80.0, 40.0 * i, 40.0 * i)
        for i in range(n_sats)
    )
    return ScenarioSpec(
        tracks, ChannelModel(open_sky_peak_dbhz=38.0, attenuation_db=attenuation, noise_std_dbhz=noise),
        duration_s=60.0,
    )


def test_satellite_count_on_generated_open_sky_epoch():
    series = generate(_zenith_scenario(9))
    epoch = series.epochs[10]
    # enumerate flags directly
    assert satellite_count(epoch) == len([o for o in epoch.observations if o.signal_present]) == 9


def test_fix_count_on_generated_no_fix_scenario():
    series = generate(_zenith_scenario(3))
    assert all(sum(o.used_in_fix for o in e.observations) == 0 for e in series.epochs)
    assert all(fix_count(e) == 0 for e in series.epochs)


def test_max_cn0_on_attenuated_generated_epoch():
    spec = ScenarioSpec(
        (SatTrack(SatelliteKey(ConstellationId.GPS, 1), 90.0, 90.0, 0.0, 0.0),),
        ChannelModel(open_sky_peak_dbhz=38.0, attenuation_db=16.0, noise_std_dbhz=0.0),
        duration_s=10.0,
    )
    series = generate(spec)
    assert epoch_max_cn0(series.epochs[5]) == 38.0 - 16.0 == 22.0


observation_st = st.builds(
    lambda svid, cn0, rho, chi: obs(svid=svid, cn0=cn0, rho=rho, chi=rho and chi),
    st.integers(1, 40),
    st.floats(0.0, 64.0),
    st.booleans(),
    st.booleans(),
)
epoch_obs_st = st.lists(observation_st, max_size=15, unique_by=lambda o: o.key)


@given(epoch_obs_st)
def test_counts_match_naive_loop(observations):
    e = Epoch(0.0, tuple(observations))
    s = x = 0
    for o in observations:
        if o.signal_present:
            s += 1
        if o.used_in_fix:
            x += 1
    assert satellite_count(e) == s
    assert fix_count(e) == x
    assert fix_count(e) <= satellite_count(e) <= len(observations)


@given(epoch_obs_st, st.randoms())
def test_max_cn0_invariant_under_reordering(observations, rnd):
    shuffled = list(observations)
    rnd.shuffle(shuffled)
    a, b = Epoch(0.0, tuple(observations)), Epoch(0.0, tuple(shuffled))
    assert epoch_max_cn0(a) == epoch_max_cn0(b)
    assert a == b


@given(epoch_obs_st, st.integers(41, 60))
def test_absent_signal_changes_nothing(observations, svid):
    e = Epoch(0.0, tuple(observations))
    e2 = Epoch(0.0, tuple(observations) + (obs(svid=svid, rho=False),))
    assert satellite_count(e2) == satellite_count(e)
    assert fix_count(e2) == fix_count(e)
    assert epoch_max_cn0(e2) == epoch_max_cn0(e)


def test_relative_time_and_span():
    s = RawSeries((Epoch(10.5), Epoch(11.5), Epoch(12.5)))
    assert s.span_s == 3.0
    assert [s.relative_time(e) for e in s.epochs] == [0.0, 1.0, 2.0]
    assert RawSeries().span_s == 0.0
