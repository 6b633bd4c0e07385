"""Relay selection for space users: the orbit-aware rule set and its variants."""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta
from typing import IO, Callable, Optional, Sequence

import numpy as np

from .frames import subpoint
from .geometry import GeometrySample, Region, SsdbConfig, classify_ssdb, relative_kinematics
from .linkquality import RadioConfig, doppler_epsilon, link_snr_db
from .sgp4 import Sgp4Batch, raise_for_error
from .timeutil import format_utc
from .tle import OrbitalElements


class Rule(str, enum.Enum):
    MIN_DISTANCE_UNDER_VMAX = "MinDistanceUnderVmax"
    MIN_VELOCITY_ALL_CRITICAL = "MinVelocityAllCritical"
    MAX_SNR_BALANCE = "MaxSnrBalance"
    OUTSIDE_MIN_VELOCITY = "OutsideMinVelocity"
    DISCONNECTED = "Disconnected"
    # single-criterion strategies used as baselines
    NEAREST = "Nearest"
    MIN_VELOCITY = "MinVelocity"
    VG_DEVIATION = "VgDeviation"


MODES = ("dual", "nearest", "min_v_in_radius", "vg_only", "random_among_selected")


@dataclass(frozen=True)
class SelectionConfig:
    v_ground: float = 7.4  # km/s
    v_ground_max: float = 8.5
    v_critical: Optional[float] = None  # None: derived from the radio's CFO edge
    search_radius: float = 968.0  # km
    low_velocity_target: float = 1.5
    outside_disconnect_speed: float = 3.0
    inside_metric: str = "vg_deviation"  # or "distance" for the plain rule set
    ssdb: SsdbConfig = field(default_factory=SsdbConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)

    def __post_init__(self):
        if not 0.0 < self.v_ground < self.v_ground_max:
            raise ValueError("need 0 < v_ground < v_ground_max")
        if self.search_radius <= 0:
            raise ValueError("search_radius must be > 0")
        if self.inside_metric not in ("vg_deviation", "distance"):
            raise ValueError(f"unknown inside_metric {self.inside_metric!r}")

    @property
    def critical_speed(self) -> float:
        """Relative speed at which the residual CFO reaches the 0.5 validity edge."""
        if self.v_critical is not None:
            return self.v_critical
        return self.v_ground + self.radio.critical_offset_speed

    @property
    def tracked_speed(self) -> float:
        """Relative speed the ground-link air interface already compensates (v_G by default)."""
        return self.critical_speed - self.radio.critical_offset_speed

    def residual_speed(self, speed):
        """Speed in excess of the tracked speed; this is what produces residual CFO."""
        return np.maximum(np.asarray(speed, dtype=float) - self.tracked_speed, 0.0)


@dataclass(frozen=True)
class SelectionResult:
    chosen: Optional[int]
    rule_fired: Rule
    geometry: Optional[GeometrySample] = None
    snr_db: Optional[float] = None

    def __post_init__(self):
        if (self.chosen is None) != (self.rule_fired == Rule.DISCONNECTED):
            raise ValueError("chosen must be absent exactly when Disconnected")


LinkModel = Callable[[GeometrySample, Region], Optional[float]]


def default_link_model(cfg: SelectionConfig) -> LinkModel:
    """SNR (dB) from distance and residual speed, None when the CFO edge is crossed."""

    def model(g: GeometrySample, region: Region) -> Optional[float]:
        residual = float(cfg.residual_speed(g.relative_speed))
        if doppler_epsilon(residual, cfg.radio) >= 0.5:
            return None
        # co-located pairs are clamped to 1 m to keep the path-loss term finite
        return link_snr_db(max(g.distance, 1e-3), residual, cfg.radio)

    return model


def usable_mask(speed: np.ndarray, region: Region, cfg: SelectionConfig) -> np.ndarray:
    """Links whose residual CFO stays inside the validity range of the SNR model."""
    return cfg.residual_speed(speed) < cfg.radio.critical_offset_speed


def rank(region: Region, d: np.ndarray, v: np.ndarray, ids: np.ndarray, cfg: SelectionConfig,
         mode: str = "dual", snr: Optional[np.ndarray] = None) -> tuple[np.ndarray, Rule]:
    """Order candidate positions by preference under ``mode``; first entry is the pick.

    ``d``, ``v`` and ``ids`` are the candidates' distances, relative speeds and
    catalog ids.  ``snr`` (dB, NaN where unusable) is only consulted when the
    balance branch fires.  An empty order means Disconnected.
    """
    d = np.asarray(d, dtype=float)
    v = np.asarray(v, dtype=float)
    ids = np.asarray(ids)
    n = d.size
    if n == 0:
        return np.empty(0, dtype=np.int64), Rule.DISCONNECTED

    if mode == "nearest":
        return np.lexsort((ids, d)), Rule.NEAREST
    if mode == "min_v_in_radius":
        return np.lexsort((ids, d, v)), Rule.MIN_VELOCITY
    if mode == "vg_only":
        return np.lexsort((ids, d, np.abs(v - cfg.v_ground))), Rule.VG_DEVIATION
    if mode not in ("dual", "random_among_selected"):
        raise ValueError(f"unknown selection mode {mode!r}")

    if region == Region.OUTSIDE:
        order = np.lexsort((ids, d, v))
        order = order[v[order] <= cfg.outside_disconnect_speed]
        return order, (Rule.OUTSIDE_MIN_VELOCITY if order.size else Rule.DISCONNECTED)
    return rank_inside(d, v, ids, cfg, cfg.inside_metric, snr)


def rank_inside(d, v, ids, cfg: SelectionConfig, metric: str = "distance",
                snr: Optional[np.ndarray] = None) -> tuple[np.ndarray, Rule]:
    """The three-branch rule set for users inside the dense band."""
    d = np.asarray(d, dtype=float)
    v = np.asarray(v, dtype=float)
    ids = np.asarray(ids)
    if d.size == 0:
        return np.empty(0, dtype=np.int64), Rule.DISCONNECTED
    under = v <= cfg.v_ground_max
    if under.any():
        pref = d if metric == "distance" else np.abs(v - cfg.v_ground)
        # candidates under v_ground_max first, each group by the preference metric
        return np.lexsort((ids, d, pref, ~under)), Rule.MIN_DISTANCE_UNDER_VMAX
    if np.all(v > cfg.critical_speed):
        return np.lexsort((ids, d, v)), Rule.MIN_VELOCITY_ALL_CRITICAL
    if snr is None:
        snr = _snr_array(d, v, Region.INSIDE, cfg)
    ok = ~np.isnan(snr)
    if not ok.any():
        return np.empty(0, dtype=np.int64), Rule.DISCONNECTED
    key = np.where(ok, -snr, np.inf)
    order = np.lexsort((ids, d, key))
    return order[ok[order]], Rule.MAX_SNR_BALANCE


def _snr_array(d, v, region: Region, cfg: SelectionConfig) -> np.ndarray:
    model = default_link_model(cfg)
    out = np.full(np.asarray(d).size, np.nan)
    for k, (dk, vk) in enumerate(zip(d, v)):
        s = model(GeometrySample(datetime.min, float(dk), float(vk), 0.0, 0.0), region)
        if s is not None:
            out[k] = s
    return out


def _unpack(candidates):
    idx = np.array([c[0] for c in candidates], dtype=np.int64)
    d = np.array([c[1].distance for c in candidates], dtype=float)
    v = np.array([c[1].relative_speed for c in candidates], dtype=float)
    return idx, d, v


def _result(candidates, order, rule, region, link_model) -> SelectionResult:
    if order.size == 0:
        return SelectionResult(None, Rule.DISCONNECTED)
    k, g = candidates[int(order[0])]
    return SelectionResult(int(k), rule, g, link_model(g, region))


def _snr_from_model(candidates, region, link_model) -> np.ndarray:
    vals = [link_model(g, region) for _, g in candidates]
    return np.array([np.nan if s is None else s for s in vals], dtype=float)


def select_inside(candidates: Sequence[tuple[int, GeometrySample]], cfg: SelectionConfig = SelectionConfig(),
                  link_model: Optional[LinkModel] = None, metric: str = "distance") -> SelectionResult:
    """Pick a relay for an Inside user; candidates are (relay index, geometry) pairs."""
    link_model = link_model or default_link_model(cfg)
    if not candidates:
        return SelectionResult(None, Rule.DISCONNECTED)
    idx, d, v = _unpack(candidates)
    snr = _snr_from_model(candidates, Region.INSIDE, link_model)
    order, rule = rank_inside(d, v, idx, cfg, metric, snr)
    return _result(candidates, order, rule, Region.INSIDE, link_model)


def select_dual(region: Region, candidates: Sequence[tuple[int, GeometrySample]],
                cfg: SelectionConfig = SelectionConfig(), link_model: Optional[LinkModel] = None) -> SelectionResult:
    """Region-aware pick: the inside rule set ordered by |v - v_G|, else slowest relay."""
    link_model = link_model or default_link_model(cfg)
    if region == Region.INSIDE:
        return select_inside(candidates, cfg, link_model, cfg.inside_metric)
    if not candidates:
        return SelectionResult(None, Rule.DISCONNECTED)
    idx, d, v = _unpack(candidates)
    order, rule = rank(Region.OUTSIDE, d, v, idx, cfg, "dual")
    return _result(candidates, order, rule, Region.OUTSIDE, link_model)


def select(mode: str, region: Region, candidates: Sequence[tuple[int, GeometrySample]],
           cfg: SelectionConfig = SelectionConfig(), link_model: Optional[LinkModel] = None) -> SelectionResult:
    """Single pick under any strategy name in :data:`MODES` (random mode picks the dual choice)."""
    link_model = link_model or default_link_model(cfg)
    if mode in ("dual", "random_among_selected"):
        return select_dual(region, candidates, cfg, link_model)
    if not candidates:
        return SelectionResult(None, Rule.DISCONNECTED)
    idx, d, v = _unpack(candidates)
    order, rule = rank(region, d, v, idx, cfg, mode)
    return _result(candidates, order, rule, region, link_model)


# -- traces -----------------------------------------------------------------------------------

@dataclass(frozen=True)
class TraceStep:
    epoch: datetime
    region: Region
    result: SelectionResult
    catalog_id: Optional[int]


@dataclass
class SelectionTrace:
    steps: list[TraceStep]
    step_seconds: float

    @property
    def results(self) -> list[SelectionResult]:
        return [s.result for s in self.steps]

    def session_lengths(self) -> list[float]:
        """Seconds spent on each relay between handovers; a gap ends the session."""
        out = []
        run = 0
        prev = None
        for s in self.steps:
            cur = s.catalog_id
            if cur is not None and cur == prev:
                run += 1
            else:
                if prev is not None:
                    out.append(run * self.step_seconds)
                run = 1 if cur is not None else 0
            prev = cur
        if prev is not None:
            out.append(run * self.step_seconds)
        return out

    def mean_connection_time(self) -> float:
        lengths = self.session_lengths()
        return float(np.mean(lengths)) if lengths else 0.0

    def speeds(self, region: Optional[Region] = None) -> np.ndarray:
        return np.array([s.result.geometry.relative_speed for s in self.steps
                         if s.result.geometry is not None and (region is None or s.region == region)])

    def distances(self) -> np.ndarray:
        return np.array([s.result.geometry.distance for s in self.steps if s.result.geometry is not None])

    def write_csv(self, fh: IO[str]) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "catalog_id", "distance_km", "relative_speed_kms", "range_rate_kms", "rule_fired"])
        for s in self.steps:
            g = s.result.geometry
            if g is None:
                w.writerow([format_utc(s.epoch), "", "", "", "", s.result.rule_fired.value])
            else:
                w.writerow([format_utc(s.epoch), s.catalog_id, f"{g.distance:.6f}", f"{g.relative_speed:.6f}",
                            f"{g.range_rate:.6f}", s.result.rule_fired.value])


def selection_trace(user: OrbitalElements, relays: Sequence[OrbitalElements], start: datetime, end: datetime,
                    step: float, cfg: SelectionConfig = SelectionConfig(), mode: str = "dual",
                    gravity: str = "wgs72") -> SelectionTrace:
    """Select a relay for ``user`` every ``step`` seconds over the half-open window [start, end)."""
    if step <= 0:
        raise ValueError("step must be > 0")
    if end < start:
        raise ValueError("window end precedes start")
    if mode not in MODES:
        raise ValueError(f"unknown selection mode {mode!r}")
    ubatch = Sgp4Batch([user], gravity)
    rbatch = Sgp4Batch(list(relays), gravity) if relays else None
    ids = np.array([r.catalog_id for r in relays], dtype=np.int64)
    link_model = default_link_model(cfg)
    n_steps = max(1, int(math.floor((end - start).total_seconds() / step - 1e-9)) + 1)
    steps = []
    for k in range(n_steps):
        at = start + timedelta(seconds=k * step)
        ur, uv, uerr = ubatch.propagate(at)
        raise_for_error(ubatch, uerr, at)
        lat = float(subpoint(ur[0], at)[0])
        region = classify_ssdb(lat, cfg.ssdb)
        if rbatch is None:
            steps.append(TraceStep(at, region, SelectionResult(None, Rule.DISCONNECTED), None))
            continue
        rr, rv, rerr = rbatch.propagate(at)
        raise_for_error(rbatch, rerr, at)
        d, v, rate = relative_kinematics(ur[0], uv[0], rr, rv)
        near = np.flatnonzero(d <= cfg.search_radius)
        near = near[np.lexsort((ids[near], d[near]))]
        cands = [(int(j), GeometrySample(at, float(d[j]), float(v[j]), float(rate[j]), lat)) for j in near]
        res = select(mode, region, cands, cfg, link_model)
        steps.append(TraceStep(at, region, res, None if res.chosen is None else int(ids[res.chosen])))
    return SelectionTrace(steps, step)
