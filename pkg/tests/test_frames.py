from __future__ import annotations

from datetime import datetime, timedelta, timezone

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spaceuser.frames import (
    EARTH_ROTATION,
    ecef_to_geodetic,
    geodetic_to_ecef,
    gmst,
    great_circle_km,
    ground_site_state,
    julian_date,
    propagate,
)
from spaceuser.geometry import relative_kinematics

from conftest import T0, fixture_sat

SIDEREAL_DAY = 86164.0905


def test_gmst_reference_value():
    # 2000-01-01 12:00 UT1: 280.46061837 deg
    at = datetime(2000, 1, 1, 12, tzinfo=timezone.utc)
    assert np.degrees(gmst(at)) == pytest.approx(280.46061837, abs=1e-6)
    assert julian_date(at) == pytest.approx(2451545.0)


def test_site_velocity_pole_and_equator():
    assert np.linalg.norm(ground_site_state(90.0, 0.0, 0.0, T0).velocity) < 1e-9
    v_eq = np.linalg.norm(ground_site_state(0.0, 33.0, 0.0, T0).velocity)
    assert v_eq == pytest.approx(0.465, abs=1e-3)
    with pytest.raises(ValueError):
        ground_site_state(91.0, 0.0, 0.0, T0)


def test_site_returns_after_one_sidereal_day():
    a = ground_site_state(37.0, -122.0, 0.1, T0)
    b = ground_site_state(37.0, -122.0, 0.1, T0 + timedelta(seconds=SIDEREAL_DAY))
    assert np.linalg.norm(a.position - b.position) < 1e-3
    c = ground_site_state(37.0, -122.0, 0.1, T0 + timedelta(hours=12))
    assert np.linalg.norm(a.position - c.position) > 5000.0


def test_site_velocity_is_rotation():
    s = ground_site_state(10.0, 50.0, 0.0, T0)
    np.testing.assert_allclose(s.velocity, np.cross([0, 0, EARTH_ROTATION], s.position), atol=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(-89.9, 89.9), st.floats(-179.9, 179.9), st.floats(0.0, 2000.0))
def test_geodetic_round_trip(lat, lon, alt):
    la, lo, al = ecef_to_geodetic(geodetic_to_ecef(lat, lon, alt))
    assert la == pytest.approx(lat, abs=1e-8)
    assert lo == pytest.approx(lon, abs=1e-8)
    assert al == pytest.approx(alt, abs=1e-6)


@settings(max_examples=100, deadline=None)
@given(st.floats(-80, 80), st.floats(-180, 180), st.floats(-80, 80), st.floats(-180, 180))
def test_chord_not_longer_than_arc(lat1, lon1, lat2, lon2):
    arc = great_circle_km(lat1, lon1, lat2, lon2)
    r = 6371.0088
    p1 = r * np.array([np.cos(np.radians(lat1)) * np.cos(np.radians(lon1)),
                       np.cos(np.radians(lat1)) * np.sin(np.radians(lon1)), np.sin(np.radians(lat1))])
    p2 = r * np.array([np.cos(np.radians(lat2)) * np.cos(np.radians(lon2)),
                       np.cos(np.radians(lat2)) * np.sin(np.radians(lon2)), np.sin(np.radians(lat2))])
    chord = np.linalg.norm(p1 - p2)
    assert chord <= arc + 1e-6
    assert chord == pytest.approx(2 * r * np.sin(arc / (2 * r)), abs=1e-6)


def test_range_rate_matches_finite_difference():
    a, b = fixture_sat("EO-MIDLAT-53"), fixture_sat("EO-POLAR-SSO")
    at = a.epoch + timedelta(minutes=17)
    h = 0.5
    def dist(t):
        sa, sb = propagate(a, t), propagate(b, t)
        return np.linalg.norm(sa.position - sb.position)
    sa, sb = propagate(a, at), propagate(b, at)
    _, _, rate = relative_kinematics(sa.position, sa.velocity, sb.position, sb.velocity)
    fd = (dist(at + timedelta(seconds=h)) - dist(at - timedelta(seconds=h))) / (2 * h)
    assert float(rate) == pytest.approx(fd, abs=1e-4)


def test_ground_site_distance_matches_chord_at_any_epoch():
    a_ecef = geodetic_to_ecef(48.1, 11.6, 0.5)
    b_ecef = geodetic_to_ecef(-33.9, 151.2, 0.0)
    chord = np.linalg.norm(a_ecef - b_ecef)
    for hours in (0, 5.5, 17.25):
        at = T0 + timedelta(hours=hours)
        a = ground_site_state(48.1, 11.6, 0.5, at)
        b = ground_site_state(-33.9, 151.2, 0.0, at)
        assert np.linalg.norm(a.position - b.position) == pytest.approx(chord, abs=1e-6)
