"""Scenario files: strict JSON schema, dotted-path overrides, path resolution."""

from __future__ import annotations

import copy
import dataclasses
import json
from dataclasses import dataclass, field
from datetime import datetime
from importlib import resources
from pathlib import Path
from typing import Any, Optional

from .errors import ConfigError
from .geometry import SsdbConfig
from .linkquality import IslModel, RadioConfig, TIERS
from .selection import MODES, SelectionConfig
from .timeutil import format_utc, parse_utc
from .waittransfer import GroundStation, WaitAndTransferConfig

DATA_PREFIX = "@data/"
GB_PER_DAY_500 = 500 * 8 * 10 ** 9  # bits/day


def data_path(name: str) -> Path:
    return Path(str(resources.files("spaceuser") / "data" / name))


def resolve_path(value: str, base: Optional[Path]) -> Path:
    """``@data/x`` is a bundled file; other relative paths are taken from ``base``."""
    if value.startswith(DATA_PREFIX):
        return data_path(value[len(DATA_PREFIX):])
    p = Path(value)
    if not p.is_absolute() and base is not None:
        p = base / p
    return p


@dataclass
class BaselineSpec:
    stations: list = field(default_factory=lambda: [dataclasses.asdict(s) for s in WaitAndTransferConfig().stations])
    min_elevation: float = 25.0
    contact_rate: float = 1.2e9
    antennas_per_station: int = 1
    step_seconds: float = 15.0

    def build(self) -> WaitAndTransferConfig:
        try:
            stations = tuple(GroundStation(**s) for s in self.stations)
        except TypeError as exc:
            raise ConfigError(f"baseline.stations: {exc}") from None
        return WaitAndTransferConfig(stations, self.min_elevation, self.contact_rate,
                                     self.antennas_per_station, self.step_seconds)


@dataclass
class SelectionSpec:
    v_ground: float = 7.4
    v_ground_max: float = 8.5
    v_critical: Optional[float] = None
    search_radius: float = 968.0
    low_velocity_target: float = 1.5
    outside_disconnect_speed: float = 3.0
    inside_metric: str = "vg_deviation"
    boundary_lat: float = 53.0


@dataclass
class RadioSpec:
    carrier_freq: float = 12e9
    subcarrier_spacing: float = 240e3
    ec_n0_ref_db: float = 20.0
    ref_distance_km: float = 550.0


@dataclass
class IslSpec:
    loss_per_km: float = 0.0035 / 2100.0
    delay_per_km: float = 1.0 / 299.792458


@dataclass
class ScenarioConfig:
    name: str = "scenario"
    start: str = "2025-03-01T00:00:00Z"
    duration: float = 24.0  # hours
    session_seconds: int = 15
    generation_rate: float = GB_PER_DAY_500  # bits/day per EO satellite
    initial_backlog: int = 0  # bits per EO satellite
    eo_tles: str = DATA_PREFIX + "eo_fleet.tle"
    relay_tles: str = DATA_PREFIX + "relays_snapshot.tle"
    pops: str = DATA_PREFIX + "pops.json"
    weather: Optional[str] = DATA_PREFIX + "weather.csv"
    eo_multiplier: int = 3
    availability_fraction: float = 1.0
    polar_outage: bool = False
    selection_mode: str = "dual"
    tier: str = "Business"
    relay_capacity: int = 32
    penalty_fraction: float = 0.1
    penalize_all: bool = False
    candidate_pool: int = 4
    gravity: str = "wgs72"
    selection: SelectionSpec = field(default_factory=SelectionSpec)
    radio: RadioSpec = field(default_factory=RadioSpec)
    isl: IslSpec = field(default_factory=IslSpec)
    baseline: Optional[BaselineSpec] = None
    base_dir: Optional[Path] = field(default=None, repr=False, compare=False)

    def validate(self) -> "ScenarioConfig":
        if not self.duration > 0:
            raise ConfigError("duration must be > 0")
        if int(self.session_seconds) != self.session_seconds or self.session_seconds <= 0:
            raise ConfigError("session_seconds must be a positive integer")
        if not 0.0 <= self.availability_fraction <= 1.0:
            raise ConfigError("availability_fraction must lie in [0, 1]")
        if self.generation_rate < 0 or self.initial_backlog < 0:
            raise ConfigError("generation_rate and initial_backlog must be >= 0")
        if self.eo_multiplier < 1:
            raise ConfigError("eo_multiplier must be >= 1")
        if self.selection_mode not in MODES:
            raise ConfigError(f"selection_mode must be one of {MODES}")
        if self.tier not in TIERS:
            raise ConfigError(f"tier must be one of {TIERS}")
        if self.relay_capacity < 0 or self.candidate_pool < 1:
            raise ConfigError("relay_capacity >= 0 and candidate_pool >= 1 required")
        if not 0.0 <= self.penalty_fraction < 1.0:
            raise ConfigError("penalty_fraction must lie in [0, 1)")
        try:
            parse_utc(self.start)
            self.selection_config()
            self.baseline_config()
        except (ValueError, TypeError) as exc:
            raise ConfigError(str(exc)) from None
        return self

    @property
    def start_time(self) -> datetime:
        return parse_utc(self.start)

    @property
    def n_sessions(self) -> int:
        return int(round(self.duration * 3600.0 / self.session_seconds))

    def path(self, value: Optional[str]) -> Optional[Path]:
        return None if value is None else resolve_path(value, self.base_dir)

    def radio_config(self) -> RadioConfig:
        return RadioConfig(self.radio.carrier_freq, self.radio.subcarrier_spacing, self.radio.ec_n0_ref_db,
                           self.radio.ref_distance_km, float(self.session_seconds))

    def selection_config(self) -> SelectionConfig:
        s = self.selection
        return SelectionConfig(s.v_ground, s.v_ground_max, s.v_critical, s.search_radius, s.low_velocity_target,
                               s.outside_disconnect_speed, s.inside_metric, SsdbConfig(s.boundary_lat),
                               self.radio_config())

    def isl_model(self) -> IslModel:
        return IslModel(self.isl.loss_per_km, self.isl.delay_per_km)

    def baseline_config(self) -> Optional[WaitAndTransferConfig]:
        return None if self.baseline is None else self.baseline.build()

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d.pop("base_dir")
        return d


_NESTED = {"selection": SelectionSpec, "radio": RadioSpec, "isl": IslSpec, "baseline": BaselineSpec}


def _build(cls, raw: dict, path: str):
    if not isinstance(raw, dict):
        raise ConfigError(f"{path or '$'}: expected an object")
    names = {f.name for f in dataclasses.fields(cls) if f.name != "base_dir"}
    unknown = set(raw) - names
    if unknown:
        raise ConfigError(f"{path or '$'}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    for key, value in raw.items():
        sub = f"{path}.{key}" if path else key
        if key in _NESTED and cls is ScenarioConfig:
            kwargs[key] = None if value is None else _build(_NESTED[key], value, sub)
        else:
            kwargs[key] = _coerce(cls, key, value, sub)
    return cls(**kwargs)


def _coerce(cls, key: str, value: Any, path: str):
    default = next(f for f in dataclasses.fields(cls) if f.name == key)
    proto = default.default if default.default is not dataclasses.MISSING else None
    if isinstance(proto, bool):
        if not isinstance(value, bool):
            raise ConfigError(f"{path}: expected true/false")
    elif isinstance(proto, int):
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"{path}: expected an integer")
        value = int(value)
    elif isinstance(proto, float):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number")
        value = float(value)
    elif proto is None and key == "v_critical":
        if value is not None and (isinstance(value, bool) or not isinstance(value, (int, float))):
            raise ConfigError(f"{path}: expected a number or null")
    elif isinstance(proto, str) and not (value is None and key == "weather"):
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string")
    return value


def scenario_from_dict(raw: dict, base_dir: Optional[Path] = None) -> ScenarioConfig:
    cfg = _build(ScenarioConfig, raw, "")
    cfg.base_dir = base_dir
    return cfg.validate()


def load_scenario(path: str | Path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from None
    return scenario_from_dict(raw, path.resolve().parent)


def apply_overrides(cfg: ScenarioConfig, overrides: list[str]) -> ScenarioConfig:
    """Apply ``a.b=value`` overrides; values are JSON when they parse, else strings."""
    raw = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        parts = key.strip().split(".")
        node = raw
        for p in parts[:-1]:
            if p in _NESTED and node is raw and node.get(p) is None:
                node[p] = dataclasses.asdict(_NESTED[p]())
            if not isinstance(node, dict) or p not in node:
                raise ConfigError(f"override {key!r}: unknown key {p!r}")
            node = node[p]
        if not isinstance(node, dict) or parts[-1] not in node:
            raise ConfigError(f"override {key!r}: unknown key {parts[-1]!r}")
        node[parts[-1]] = value
    return scenario_from_dict(copy.deepcopy(raw), cfg.base_dir)


def scenario_summary(cfg: ScenarioConfig) -> dict:
    d = cfg.to_dict()
    d["start"] = format_utc(cfg.start_time)
    return d
