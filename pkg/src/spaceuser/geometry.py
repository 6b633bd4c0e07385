"""Pairwise geometry, density boundaries, density grids and radius search."""

from __future__ import annotations

import csv
import enum
from dataclasses import dataclass, field
from datetime import datetime
from typing import IO, Sequence

import numpy as np

from .errors import EpochMismatch
from .frames import StateVector, subpoint


@dataclass(frozen=True)
class GeometrySample:
    epoch: datetime
    distance: float  # km
    relative_speed: float  # km/s, |v1 - v2|
    range_rate: float  # km/s, d(distance)/dt
    subpoint_lat: float  # deg, geodetic latitude of the observer


class Region(str, enum.Enum):
    INSIDE = "Inside"
    OUTSIDE = "Outside"


@dataclass(frozen=True)
class SsdbConfig:
    boundary_lat: float = 53.0

    def __post_init__(self):
        if not 0.0 < self.boundary_lat < 90.0:
            raise ValueError(f"boundary_lat must lie in (0, 90), got {self.boundary_lat}")


def classify_ssdb(subpoint_lat: float, cfg: SsdbConfig = SsdbConfig()) -> Region:
    """Inside iff |lat| <= boundary (the boundary itself counts as inside)."""
    if abs(subpoint_lat) > 90.0:
        raise ValueError(f"latitude {subpoint_lat} outside [-90, 90]")
    return Region.INSIDE if abs(subpoint_lat) <= cfg.boundary_lat else Region.OUTSIDE


def relative_kinematics(pos_a, vel_a, pos_b, vel_b):
    """Distance, relative speed and range rate, broadcasting over leading axes."""
    dr = np.asarray(pos_b, dtype=float) - np.asarray(pos_a, dtype=float)
    dv = np.asarray(vel_b, dtype=float) - np.asarray(vel_a, dtype=float)
    distance = np.sqrt(np.sum(dr * dr, axis=-1))
    rel_speed = np.sqrt(np.sum(dv * dv, axis=-1))
    with np.errstate(divide="ignore", invalid="ignore"):
        rate = np.where(distance > 0.0, np.sum(dr * dv, axis=-1) / distance, 0.0)
    return distance, rel_speed, rate


def geometry(a: StateVector, b: StateVector) -> GeometrySample:
    if a.epoch != b.epoch:
        raise EpochMismatch(f"{a.epoch.isoformat()} != {b.epoch.isoformat()}")
    d, v, rr = relative_kinematics(a.position, a.velocity, b.position, b.velocity)
    lat, _ = subpoint(a.position, a.epoch)
    return GeometrySample(a.epoch, float(d), float(v), float(rr), float(lat))


@dataclass
class DensityGrid:
    cell_size: float
    epoch: datetime
    counts: dict[tuple[int, int], int] = field(default_factory=dict)

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def cell_center(self, lat_bin: int, lon_bin: int) -> tuple[float, float]:
        return (-90.0 + (lat_bin + 0.5) * self.cell_size, -180.0 + (lon_bin + 0.5) * self.cell_size)

    def zonal_sum(self, lo: float, hi: float) -> int:
        """Satellites in cells whose latitude centre satisfies lo <= |lat| <= hi."""
        total = 0
        for (i, j), n in self.counts.items():
            lat, _ = self.cell_center(i, j)
            if lo <= abs(lat) <= hi:
                total += n
        return total

    def rows(self) -> list[tuple[float, float, int]]:
        return [(*self.cell_center(i, j), n) for (i, j), n in sorted(self.counts.items())]

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["lat_bin_center", "lon_bin_center", "count"])
        for lat, lon, n in self.rows():
            w.writerow([f"{lat:.6g}", f"{lon:.6g}", n])


def _check_cell_size(cell_size: float) -> None:
    if cell_size <= 0 or abs(180.0 / cell_size - round(180.0 / cell_size)) > 1e-9:
        raise ValueError(f"cell size {cell_size} must divide 180 evenly")


def density_grid_from_positions(positions: np.ndarray, epoch: datetime, cell_size: float) -> DensityGrid:
    _check_cell_size(cell_size)
    grid = DensityGrid(cell_size, epoch)
    positions = np.asarray(positions, dtype=float).reshape(-1, 3)
    if positions.shape[0] == 0:
        return grid
    lat, lon = subpoint(positions, epoch)
    n_lat = int(round(180.0 / cell_size))
    n_lon = int(round(360.0 / cell_size))
    i = np.clip(np.floor((lat + 90.0) / cell_size).astype(int), 0, n_lat - 1)
    j = np.floor((np.mod(lon + 180.0, 360.0)) / cell_size).astype(int) % n_lon
    keys, counts = np.unique(np.stack([i, j], axis=1), axis=0, return_counts=True)
    grid.counts = {(int(a), int(b)): int(c) for (a, b), c in zip(keys, counts)}
    return grid


def density_grid(sats: Sequence[StateVector], cell_size: float) -> DensityGrid:
    if not sats:
        raise ValueError("no satellites to grid")
    epoch = sats[0].epoch
    if any(s.epoch != epoch for s in sats):
        raise EpochMismatch("density grid needs states at one epoch")
    return density_grid_from_positions(np.array([s.position for s in sats]), epoch, cell_size)


def order_candidates(distance: np.ndarray, catalog_ids: np.ndarray, radius: float) -> np.ndarray:
    """Indices with distance <= radius, by ascending distance then catalog id."""
    idx = np.flatnonzero(distance <= radius)
    if idx.size:
        idx = idx[np.lexsort((catalog_ids[idx], distance[idx]))]
    return idx


def candidates_within(user: StateVector, relays: Sequence[StateVector], radius: float,
                      catalog_ids: Sequence[int] | None = None) -> list[tuple[int, GeometrySample]]:
    if any(r.epoch != user.epoch for r in relays):
        raise EpochMismatch("relays and user must share an epoch")
    if not relays:
        return []
    pos = np.array([r.position for r in relays])
    vel = np.array([r.velocity for r in relays])
    d, v, rr = relative_kinematics(user.position, user.velocity, pos, vel)
    ids = np.arange(len(relays)) if catalog_ids is None else np.asarray(catalog_ids)
    lat = float(subpoint(user.position, user.epoch)[0])
    return [(int(k), GeometrySample(user.epoch, float(d[k]), float(v[k]), float(rr[k]), lat))
            for k in order_candidates(d, ids, radius)]
