from __future__ import annotations

import io
import json
import math
from datetime import timedelta

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spaceuser.errors import (
    EpsilonOutOfRange,
    NoPopAvailable,
    NonPositiveInput,
    SchemaViolation,
    UnknownTier,
    UnknownWeatherClass,
)
from spaceuser.frames import StateVector, ecef_to_teme, geodetic_to_ecef, subpoint
from spaceuser.linkquality import (
    SPEED_OF_LIGHT,
    PopProfile,
    RadioConfig,
    WeatherTrace,
    best_routes,
    cfo_snr,
    doppler_epsilon,
    ec_n0_db_at,
    fspl_db,
    load_pop_profiles,
    pop_route_quality,
    space_user_route,
)
from spaceuser.timeutil import parse_utc

from conftest import T0, pops, weather


def _pop(pop_id, lat, lon, loss, delay=30.0, radius=900.0, **extra_weather):
    w = {"clear": loss, **extra_weather}
    return PopProfile(pop_id, lat, lon, w, {k: delay for k in w}, {"Business": 3e7, "Standard": 7.5e6}, radius)


# -- free-space path loss

def test_fspl_reference_value():
    assert fspl_db(550.0, 12e9) == pytest.approx(168.83, abs=0.01)


def test_fspl_doubling_and_zero():
    for d in (1.0, 550.0, 2000.0):
        assert fspl_db(2 * d, 12e9) - fspl_db(d, 12e9) == pytest.approx(20 * math.log10(2), abs=1e-9)
    d0 = SPEED_OF_LIGHT / (4 * math.pi * 12e9) / 1000.0
    assert fspl_db(d0, 12e9) == pytest.approx(0.0, abs=1e-9)


@pytest.mark.parametrize("d,f", [(0.0, 12e9), (-1.0, 12e9), (550.0, 0.0)])
def test_fspl_rejects_non_positive(d, f):
    with pytest.raises(NonPositiveInput):
        fspl_db(d, f)


@settings(max_examples=100, deadline=None)
@given(st.floats(1.0, 5000.0), st.floats(1e9, 3e10), st.floats(1.001, 3.0))
def test_fspl_strictly_increasing(d, f, k):
    assert fspl_db(d * k, f) > fspl_db(d, f)
    assert fspl_db(d, f * k) > fspl_db(d, f)


# -- CFO degradation

@pytest.mark.parametrize("ec_n0", [0.1, 1.0, 10.0, 100.0, 1e4])
def test_cfo_zero_offset_is_identity(ec_n0):
    assert cfo_snr(ec_n0, 0.0) == ec_n0


def test_cfo_hand_value():
    x = math.pi / 4
    expected = 100 * (math.sin(x) / x) ** 2 / (1 + 0.5947 * 100 * math.sin(x) ** 2)
    assert cfo_snr(100.0, 0.25) == pytest.approx(expected, rel=1e-12)
    assert cfo_snr(100.0, 0.25) == pytest.approx(2.637, abs=1e-3)


@pytest.mark.parametrize("ec_n0", [1.0, 10.0, 100.0])
def test_cfo_strictly_decreasing(ec_n0):
    vals = [cfo_snr(ec_n0, 0.05 * k) for k in range(1, 10)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


@pytest.mark.parametrize("eps", [0.5, -0.5, 0.7, 3.0])
def test_cfo_out_of_range(eps):
    with pytest.raises(EpsilonOutOfRange):
        cfo_snr(10.0, eps)


@settings(max_examples=200, deadline=None)
@given(st.floats(1e-3, 1e5), st.floats(-0.4999, 0.4999))
def test_cfo_never_improves(ec_n0, eps):
    assert cfo_snr(ec_n0, eps) <= ec_n0 * (1 + 1e-12)


def test_doppler_epsilon():
    assert doppler_epsilon(0.0) == 0.0
    assert doppler_epsilon(3.0) == pytest.approx(3000 / 299792458 * 12e9 / 240e3, rel=1e-12)
    assert doppler_epsilon(3.0) == pytest.approx(0.5004, abs=1e-4)
    assert doppler_epsilon(-2.0) == pytest.approx(2 * doppler_epsilon(1.0), rel=1e-12)
    assert doppler_epsilon(RadioConfig().critical_offset_speed) == pytest.approx(0.5, rel=1e-12)


def test_ec_n0_at_reference_range():
    assert ec_n0_db_at(550.0) == pytest.approx(20.0, abs=1e-12)
    assert ec_n0_db_at(1100.0) == pytest.approx(20.0 - 20 * math.log10(2), abs=1e-9)


# -- routes over PoP profiles

def test_isl_fixture_values():
    frankfurt = _pop("Frankfurt", 50.1, 8.7, 0.0027)
    assert pop_route_quality(frankfurt, "clear", "Business", 0.0).loss_rate == 0.0027
    assert pop_route_quality(frankfurt, "clear", "Business", 2100.0).loss_rate == pytest.approx(0.0062, abs=1e-9)
    half = pop_route_quality(frankfurt, "clear", "Business", 1050.0)
    assert half.loss_rate == pytest.approx(0.00445, abs=1e-9)
    assert half.loss_rate - 0.0027 == pytest.approx(0.00175, abs=1e-12)


def test_isl_delay_is_light_time():
    q = pop_route_quality(_pop("X", 0, 0, 0.001, delay=20.0), "clear", "Business", 299.792458)
    assert q.delay_ms == pytest.approx(21.0, abs=1e-12)


def test_deliverable_bits_invariant_and_errors():
    p = _pop("X", 0, 0, 0.01)
    q = pop_route_quality(p, "clear", "Business", 300.0)
    assert q.deliverable_bits == pytest.approx(3e7 * 15 * (1 - q.loss_rate), rel=1e-12)
    with pytest.raises(UnknownWeatherClass):
        pop_route_quality(p, "rain", "Business", 0.0)
    with pytest.raises(UnknownTier):
        pop_route_quality(p, "clear", "Priority", 0.0)


def test_loss_clamped_below_one():
    q = pop_route_quality(_pop("X", 0, 0, 0.9), "clear", "Business", 1e9)
    assert 0.0 <= q.loss_rate < 1.0 and q.deliverable_bits >= 0.0


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 20000.0), st.floats(0.0, 20000.0))
def test_loss_monotone_in_isl(a, b):
    p = _pop("X", 0, 0, 0.004)
    lo, hi = sorted((a, b))
    qa, qb = pop_route_quality(p, "clear", "Business", lo), pop_route_quality(p, "clear", "Business", hi)
    assert qa.loss_rate <= qb.loss_rate
    assert qa.deliverable_bits >= qb.deliverable_bits


def _relay_over(lat, lon, at=T0, alt=550.0):
    pos = ecef_to_teme(geodetic_to_ecef(lat, lon, alt), at)
    return StateVector(at, pos, np.array([0.0, 0.0, 7.6]))


def test_single_pop_directly_below():
    relay = _relay_over(47.6, -122.3)
    user = StateVector(T0, relay.position + np.array([100.0, 0, 0]), relay.velocity)
    pop_id, q = space_user_route(user, relay, [_pop("Seattle", 47.6, -122.3, 0.0045)])
    assert pop_id == "Seattle"
    assert q.isl_km == 0.0 and q.loss_rate == 0.0045
    assert q.snr_db is not None and q.epsilon == 0.0


def test_bad_local_weather_sends_traffic_to_farther_pop():
    relay = _relay_over(41.9, -87.6)  # over Chicago
    user = StateVector(T0, relay.position + np.array([50.0, 0, 0]), relay.velocity)
    chicago = _pop("Chicago", 41.88, -87.63, 0.003, snow=0.02)
    seattle = _pop("Seattle", 47.61, -122.33, 0.0045)
    snowing = WeatherTrace([("Chicago", T0 - timedelta(hours=1), "snow")])
    assert space_user_route(user, relay, [chicago, seattle])[0] == "Chicago"
    pop_id, q = space_user_route(user, relay, [chicago, seattle], snowing)
    assert pop_id == "Seattle" and q.isl_km > 0


def test_no_pop_available():
    relay = _relay_over(0, 0)
    with pytest.raises(NoPopAvailable):
        space_user_route(relay, relay, [])


def _brute_force_pop(lat, lon, profiles, w, tier="Business"):
    from spaceuser.linkquality import isl_distance_km
    scored = []
    for p in profiles:
        q = pop_route_quality(p, w.at(p.pop_id, T0), tier, isl_distance_km(lat, lon, p))
        scored.append((-q.deliverable_bits, q.delay_ms, p.pop_id))
    return min(scored)[2]


def test_bundled_pops_mid_atlantic_matches_brute_force():
    profiles = list(pops())
    assert [p.pop_id for p in profiles] == ["Seattle", "New York", "Chicago", "Denver", "Dallas", "Frankfurt", "Lagos"]
    relay = _relay_over(35.0, -40.0)
    user = StateVector(T0, relay.position * 0.99, relay.velocity)
    lat, lon = (float(x) for x in subpoint(relay.position, T0))
    assert space_user_route(user, relay, profiles, weather())[0] == _brute_force_pop(lat, lon, profiles, weather())


def test_vectorized_routes_match_scalar():
    profiles = list(pops())
    rng = np.random.default_rng(7)
    lat, lon = rng.uniform(-70, 70, 300), rng.uniform(-180, 180, 300)
    w = weather()
    table = best_routes(lat, lon, profiles, [w.at(p.pop_id, T0) for p in profiles], "Business")
    for k in range(lat.size):
        assert profiles[table.pop_index[k]].pop_id == _brute_force_pop(lat[k], lon[k], profiles, w)


def test_vectorized_tie_break_by_name_regardless_of_order():
    a, b = _pop("Bravo", 10, 10, 0.01), _pop("Alpha", 10, 10, 0.01)
    t = best_routes(np.array([10.0]), np.array([10.0]), [a, b], ["clear", "clear"], "Business")
    assert t.pop_index[0] == 1


def test_route_choice_invariant_to_rate_rescaling():
    profiles = list(pops())
    relay = _relay_over(45.0, -60.0)
    user = StateVector(T0, relay.position * 0.99, relay.velocity)
    base = space_user_route(user, relay, profiles, weather())[0]
    scaled = [PopProfile(p.pop_id, p.lat, p.lon, p.loss_rate, p.delay_ms,
                         {k: 3.7 * v for k, v in p.tier_rates.items()}, p.serving_radius_km) for p in profiles]
    assert space_user_route(user, relay, scaled, weather())[0] == base


def test_space_user_route_cfo_gate():
    relay = _relay_over(0.0, 0.0)
    slow = StateVector(T0, relay.position + [200.0, 0, 0], relay.velocity + [7.0, 0, 0])
    fast = StateVector(T0, relay.position + [200.0, 0, 0], relay.velocity + [11.0, 0, 0])
    _, q_slow = space_user_route(slow, relay, list(pops()))
    _, q_fast = space_user_route(fast, relay, list(pops()))
    assert q_slow.usable and q_slow.epsilon == 0.0
    assert not q_fast.usable and q_fast.snr_db is None


# -- profile files

def test_bundled_weather_is_never_kinder_than_clear():
    for p in pops():
        for cls in ("cloud", "rain", "snow"):
            assert p.loss_rate[cls] >= p.loss_rate["clear"]


def _doc(**pop_overrides):
    pop = {"pop_id": "X", "lat": 1.0, "lon": 2.0,
           "weather": {"clear": {"loss_rate": 0.01, "delay_ms": 30.0}},
           "tier_rates": {"Business": 3e7}}
    pop.update(pop_overrides)
    return {"schema_version": 1, "pops": [pop]}


def test_load_profiles_valid_and_empty():
    assert load_pop_profiles(io.StringIO("")) == []
    got = load_pop_profiles(io.StringIO(json.dumps(_doc())))
    assert got[0].pop_id == "X" and got[0].serving_radius_km == 900.0


@pytest.mark.parametrize("doc,where", [
    (_doc(weather={"clear": {"loss_rate": 1.0, "delay_ms": 30.0}}), "$.pops[0].weather.clear.loss_rate"),
    (_doc(weather={"clear": {"loss_rate": 0.01, "delay_ms": 0.0}}), "$.pops[0].weather.clear.delay_ms"),
    (_doc(colour="blue"), "$.pops[0]"),
    (_doc(tier_rates={"Gold": 1.0}), "$.pops[0].tier_rates.Gold"),
    (_doc(weather={"fog": {"loss_rate": 0.01, "delay_ms": 3.0}}), "$.pops[0].weather.fog"),
    ({"schema_version": 2, "pops": []}, "$.schema_version"),
    ({"schema_version": 1, "pops": [], "extra": 1}, "$"),
])
def test_load_profiles_schema_violations(doc, where):
    with pytest.raises(SchemaViolation) as info:
        load_pop_profiles(io.StringIO(json.dumps(doc)))
    assert info.value.path == where


def test_weather_trace_lookup():
    w = weather()
    assert w.at("Nowhere", T0) == "clear"
    assert w.at("Seattle", T0 - timedelta(days=1)) == "clear"
    assert w.at("Seattle", parse_utc("2025-03-01T00:30:00Z")) == "rain"
    with pytest.raises(UnknownWeatherClass):
        WeatherTrace([("X", T0, "hail")])
    with pytest.raises(SchemaViolation):
        WeatherTrace.read_csv(io.StringIO("a,b,c\n1,2,3\n"))
