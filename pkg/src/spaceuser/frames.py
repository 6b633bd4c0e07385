"""Earth rotation, WGS84 geodesy and the TEME state vectors built on them."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from functools import lru_cache

import numpy as np

from .sgp4 import Sgp4Batch, raise_for_error
from .tle import OrbitalElements

WGS84_A = 6378.137  # km
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)
EARTH_ROTATION = 7.292115146706979e-5  # rad/s
MEAN_EARTH_RADIUS = 6371.0088  # km
UNIX_EPOCH_JD = 2440587.5


@dataclass(frozen=True)
class StateVector:
    epoch: datetime
    position: np.ndarray  # km, TEME
    velocity: np.ndarray  # km/s, TEME

    @property
    def radius(self) -> float:
        return float(np.linalg.norm(self.position))


def julian_date(at: datetime) -> float:
    if at.tzinfo is None:
        at = at.replace(tzinfo=timezone.utc)
    return UNIX_EPOCH_JD + at.timestamp() / 86400.0


def gmst(at: datetime) -> float:
    """Greenwich mean sidereal angle (IAU-82, UT1 taken as UTC), radians."""
    return gmst_jd(julian_date(at))


def gmst_jd(jd):
    """Vectorized :func:`gmst` on Julian dates."""
    tut1 = (np.asarray(jd, dtype=float) - 2451545.0) / 36525.0
    seconds = (-6.2e-6 * tut1 ** 3 + 0.093104 * tut1 ** 2
               + (876600.0 * 3600.0 + 8640184.812866) * tut1 + 67310.54841)
    return np.mod(np.radians(seconds / 240.0), 2.0 * np.pi)


def _rot_z(angle: float, xyz: np.ndarray) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    return np.stack([c * x - s * y, s * x + c * y, z], axis=-1)


def geodetic_to_ecef(lat_deg, lon_deg, alt_km=0.0) -> np.ndarray:
    lat = np.radians(lat_deg)
    lon = np.radians(lon_deg)
    sin_lat = np.sin(lat)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sin_lat ** 2)
    x = (n + alt_km) * np.cos(lat) * np.cos(lon)
    y = (n + alt_km) * np.cos(lat) * np.sin(lon)
    z = (n * (1.0 - WGS84_E2) + alt_km) * sin_lat
    return np.stack(np.broadcast_arrays(x, y, z), axis=-1)


def ecef_to_geodetic(xyz: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(lat deg, lon deg, alt km) for ECEF points, by fixed-point iteration."""
    x, y, z = xyz[..., 0], xyz[..., 1], xyz[..., 2]
    p = np.hypot(x, y)
    lon = np.arctan2(y, x)
    lat = np.arctan2(z, p * (1.0 - WGS84_E2))
    for _ in range(6):
        sin_lat = np.sin(lat)
        n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sin_lat ** 2)
        lat = np.arctan2(z + n * WGS84_E2 * sin_lat, p)
    sin_lat = np.sin(lat)
    n = WGS84_A / np.sqrt(1.0 - WGS84_E2 * sin_lat ** 2)
    cos_lat = np.cos(lat)
    with np.errstate(divide="ignore", invalid="ignore"):
        alt = np.where(np.abs(cos_lat) > 1e-10, p / cos_lat - n, np.abs(z) - n * (1.0 - WGS84_E2))
    return np.degrees(lat), np.degrees(lon), alt


def teme_to_ecef(position: np.ndarray, at: datetime) -> np.ndarray:
    return _rot_z(-gmst(at), np.asarray(position, dtype=float))


def ecef_to_teme(position: np.ndarray, at: datetime) -> np.ndarray:
    return _rot_z(gmst(at), np.asarray(position, dtype=float))


def subpoint(position: np.ndarray, at: datetime) -> tuple[np.ndarray, np.ndarray]:
    """Geodetic latitude/longitude (deg) under TEME position(s)."""
    lat, lon, _ = ecef_to_geodetic(teme_to_ecef(position, at))
    return lat, lon


def ground_site_state(lat: float, lon: float, alt: float, at: datetime) -> StateVector:
    """Position and rotational velocity of a fixed site, in TEME."""
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"latitude {lat} outside [-90, 90]")
    r = ecef_to_teme(geodetic_to_ecef(lat, lon, alt), at)
    v = np.array([-EARTH_ROTATION * r[1], EARTH_ROTATION * r[0], 0.0])
    return StateVector(at, r, v)


def elevation_deg(site_ecef: np.ndarray, site_lat: float, site_lon: float,
                  target_ecef: np.ndarray) -> np.ndarray:
    """Elevation of target(s) above the site's local horizon."""
    lat = np.radians(site_lat)
    lon = np.radians(site_lon)
    up = np.array([np.cos(lat) * np.cos(lon), np.cos(lat) * np.sin(lon), np.sin(lat)])
    rel = np.asarray(target_ecef) - site_ecef
    rng = np.linalg.norm(rel, axis=-1)
    return np.degrees(np.arcsin(np.clip((rel @ up) / rng, -1.0, 1.0)))


def great_circle_km(lat1, lon1, lat2, lon2) -> np.ndarray:
    """Haversine distance on a sphere of mean Earth radius."""
    p1, p2 = np.radians(lat1), np.radians(lat2)
    dlat = p2 - p1
    dlon = np.radians(np.asarray(lon2) - np.asarray(lon1))
    h = np.sin(dlat / 2.0) ** 2 + np.cos(p1) * np.cos(p2) * np.sin(dlon / 2.0) ** 2
    return 2.0 * MEAN_EARTH_RADIUS * np.arcsin(np.sqrt(np.clip(h, 0.0, 1.0)))


@lru_cache(maxsize=4096)
def _batch(elements: OrbitalElements, gravity: str) -> Sgp4Batch:
    return Sgp4Batch([elements], gravity)


def propagate(elements: OrbitalElements, at: datetime, gravity: str = "wgs72") -> StateVector:
    """SGP4 state of one satellite at a UTC instant (within +/-7 days of epoch)."""
    batch = _batch(elements, gravity)
    r, v, err = batch.propagate(at)
    raise_for_error(batch, err, at)
    return StateVector(at, r[0], v[0])
