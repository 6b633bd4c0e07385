"""Wait-and-transfer baseline: EO satellites dump data only over ground stations."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import Sequence

import numpy as np

from .frames import _rot_z, elevation_deg, geodetic_to_ecef, gmst_jd, julian_date
from .sgp4 import Sgp4Batch
from .tle import OrbitalElements


@dataclass(frozen=True)
class GroundStation:
    name: str
    lat: float
    lon: float
    alt: float = 0.0  # km


# high-latitude heavy sites plus two mid/low-latitude ones, as commercial EO networks use
DEFAULT_STATIONS = (
    GroundStation("Svalbard", 78.23, 15.41, 0.5),
    GroundStation("Fairbanks", 64.86, -147.85, 0.2),
    GroundStation("Punta Arenas", -53.16, -70.91, 0.05),
    GroundStation("Hartebeesthoek", -25.89, 27.69, 1.5),
    GroundStation("Awarua", -46.53, 168.38, 0.01),
)


@dataclass(frozen=True)
class WaitAndTransferConfig:
    stations: tuple[GroundStation, ...] = field(default_factory=lambda: DEFAULT_STATIONS)
    min_elevation: float = 25.0  # deg
    contact_rate: float = 1.2e9  # bits/s, placeholder
    antennas_per_station: int = 1
    step_seconds: float = 15.0

    def __post_init__(self):
        if not self.stations:
            raise ValueError("at least one ground station is required")
        if not 0.0 < self.min_elevation <= 90.0:
            raise ValueError("min_elevation must lie in (0, 90]")
        if self.contact_rate < 0 or self.antennas_per_station < 1 or self.step_seconds <= 0:
            raise ValueError("contact_rate >= 0, antennas_per_station >= 1 and step_seconds > 0 required")


def elevation_series(el: OrbitalElements, station: GroundStation, start: datetime, end: datetime,
                     step: float = 1.0, gravity: str = "wgs72") -> tuple[np.ndarray, np.ndarray]:
    """(seconds from start, elevation deg) sampled every ``step`` seconds."""
    secs = np.arange(0.0, (end - start).total_seconds() + 1e-9, step)
    batch = Sgp4Batch([el] * secs.size, gravity)
    offset = (start - el.epoch).total_seconds() / 60.0
    r, _, _ = batch.propagate_minutes(offset + secs / 60.0)
    ecef = _rot_z(-gmst_jd(julian_date(start) + secs / 86400.0), r)
    site = geodetic_to_ecef(station.lat, station.lon, station.alt)
    elev = np.full(secs.size, np.nan)
    ok = np.isfinite(ecef).all(axis=1)
    elev[ok] = elevation_deg(site, station.lat, station.lon, ecef[ok])
    return secs, elev


def contact_windows(el: OrbitalElements, station: GroundStation, start: datetime, end: datetime,
                    min_elevation: float, step: float = 1.0, gravity: str = "wgs72") -> list[tuple[datetime, datetime]]:
    """Intervals during which the satellite is above ``min_elevation`` at the station."""
    secs, elev = elevation_series(el, station, start, end, step, gravity)
    up = np.nan_to_num(elev, nan=-90.0) >= min_elevation
    edges = np.diff(np.concatenate([[0], up.astype(np.int8), [0]]))
    rises = np.flatnonzero(edges == 1)
    sets = np.flatnonzero(edges == -1) - 1
    return [(start + timedelta(seconds=float(secs[a])), start + timedelta(seconds=float(secs[b])))
            for a, b in zip(rises, sets)]


@dataclass
class ContactState:
    """Which satellite each station antenna is serving."""

    serving: list[list[int]]

    @classmethod
    def empty(cls, n_stations: int) -> "ContactState":
        return cls([[] for _ in range(n_stations)])


def assign_antennas(elev: np.ndarray, min_elevation: float, antennas: int, state: ContactState,
                    eligible: np.ndarray | None = None) -> ContactState:
    """Greedy station-by-station antenna assignment for one step.

    ``elev`` is stations x satellites.  A station keeps a satellite it was
    already serving while it stays above the mask; free antennas take the
    highest remaining satellite.  A satellite talks to one station at a time.
    """
    n_st, n_sat = elev.shape
    visible = np.nan_to_num(elev, nan=-90.0) >= min_elevation
    if eligible is not None:
        visible &= eligible[None, :]
    taken = np.zeros(n_sat, dtype=bool)
    out = []
    for s in range(n_st):
        keep = [k for k in state.serving[s] if visible[s, k] and not taken[k]][:antennas]
        taken[keep] = True
        free = antennas - len(keep)
        if free > 0:
            cand = np.flatnonzero(visible[s] & ~taken)
            if cand.size:
                cand = cand[np.lexsort((cand, -elev[s, cand]))][:free]
                keep.extend(int(k) for k in cand)
                taken[cand] = True
        out.append(keep)
    return ContactState(out)


def station_elevations(ecef: np.ndarray, stations: Sequence[GroundStation]) -> np.ndarray:
    """Stations x satellites elevation matrix from satellite ECEF positions."""
    out = np.full((len(stations), ecef.shape[0]), np.nan)
    ok = np.isfinite(ecef).all(axis=1)
    for s, st in enumerate(stations):
        site = geodetic_to_ecef(st.lat, st.lon, st.alt)
        out[s, ok] = elevation_deg(site, st.lat, st.lon, ecef[ok])
    return out
