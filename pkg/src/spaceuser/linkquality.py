"""Link budget, CFO degradation, PoP profiles and route quality."""

from __future__ import annotations

import bisect
import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    EpsilonOutOfRange,
    NoPopAvailable,
    NonPositiveInput,
    SchemaViolation,
    UnknownTier,
    UnknownWeatherClass,
)
from .frames import StateVector, great_circle_km, subpoint
from .geometry import relative_kinematics
from .timeutil import parse_utc

SPEED_OF_LIGHT = 299_792_458.0  # m/s
WEATHER_CLASSES = ("clear", "cloud", "rain", "snow")
TIERS = ("Standard", "Roam", "Priority", "Business")
PROFILE_SCHEMA_VERSION = 1
_MAX_LOSS = math.nextafter(1.0, 0.0)


@dataclass(frozen=True)
class RadioConfig:
    carrier_freq: float = 12e9  # Hz
    subcarrier_spacing: float = 240e3  # Hz
    ec_n0_ref_db: float = 20.0  # at ref_distance_km
    ref_distance_km: float = 550.0
    session_seconds: float = 15.0
    tier_rate: Mapping[str, float] = field(default_factory=lambda: {
        "Standard": 7.5e6, "Roam": 1.0e7, "Priority": 1.65e7, "Business": 3.0e7})

    def __post_init__(self):
        if self.carrier_freq <= 0 or self.subcarrier_spacing <= 0:
            raise ValueError("carrier_freq and subcarrier_spacing must be positive")

    @property
    def critical_offset_speed(self) -> float:
        """Residual speed (km/s) at which the normalized CFO reaches 0.5."""
        return 0.5 * self.subcarrier_spacing * SPEED_OF_LIGHT / self.carrier_freq / 1000.0


@dataclass(frozen=True)
class IslModel:
    loss_per_km: float = 0.0035 / 2100.0
    delay_per_km: float = 1.0 / 299.792458  # ms per km at light speed

    def __post_init__(self):
        if self.loss_per_km < 0:
            raise ValueError("loss_per_km must be >= 0")


@dataclass(frozen=True)
class PopProfile:
    pop_id: str
    lat: float
    lon: float
    loss_rate: Mapping[str, float]  # by weather class
    delay_ms: Mapping[str, float]  # by weather class
    tier_rates: Mapping[str, float]  # bits/s
    serving_radius_km: float = 900.0


@dataclass(frozen=True)
class RouteQuality:
    loss_rate: float
    delay_ms: float
    snr_db: float | None
    deliverable_bits: float  # per session
    isl_km: float = 0.0
    epsilon: float = 0.0

    @property
    def usable(self) -> bool:
        return abs(self.epsilon) < 0.5


# -- radio primitives ----------------------------------------------------------------

def fspl_db(distance_km: float, freq_hz: float) -> float:
    """Free-space path loss, distance in km and frequency in Hz."""
    if distance_km <= 0 or freq_hz <= 0:
        raise NonPositiveInput(f"distance {distance_km} km and frequency {freq_hz} Hz must be > 0")
    d = distance_km * 1000.0
    return 20.0 * math.log10(d) + 20.0 * math.log10(freq_hz) + 20.0 * math.log10(4.0 * math.pi / SPEED_OF_LIGHT)


def cfo_snr(ec_n0: float, epsilon: float) -> float:
    """Lower bound on linear SNR for a subcarrier with normalized CFO ``epsilon``."""
    if abs(epsilon) >= 0.5:
        raise EpsilonOutOfRange(epsilon)
    if epsilon == 0.0:
        return ec_n0
    x = math.pi * epsilon
    s = math.sin(x)
    return ec_n0 * (s / x) ** 2 / (1.0 + 0.5947 * ec_n0 * s * s)


def doppler_epsilon(range_rate: float, radio: RadioConfig = RadioConfig()) -> float:
    """Doppler shift over subcarrier spacing; ``range_rate`` in km/s."""
    return abs(range_rate) * 1000.0 / SPEED_OF_LIGHT * radio.carrier_freq / radio.subcarrier_spacing


def ec_n0_db_at(distance_km: float, radio: RadioConfig = RadioConfig()) -> float:
    """Reference Ec/N0 shifted by the path-loss difference from the reference range."""
    return radio.ec_n0_ref_db - (fspl_db(distance_km, radio.carrier_freq)
                                 - fspl_db(radio.ref_distance_km, radio.carrier_freq))


def link_snr_db(distance_km: float, residual_speed: float, radio: RadioConfig = RadioConfig()) -> float:
    """SNR (dB) of a space link; raises EpsilonOutOfRange past the CFO validity edge."""
    ec_n0 = 10.0 ** (ec_n0_db_at(distance_km, radio) / 10.0)
    return 10.0 * math.log10(cfo_snr(ec_n0, doppler_epsilon(residual_speed, radio)))


# -- PoP profiles ----------------------------------------------------------------------

_TOP_KEYS = {"schema_version", "pops"}
_POP_KEYS = {"pop_id", "lat", "lon", "serving_radius_km", "weather", "tier_rates"}
_POP_REQUIRED = {"pop_id", "lat", "lon", "weather", "tier_rates"}
_WEATHER_KEYS = {"loss_rate", "delay_ms"}


def _number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
        raise SchemaViolation(path, f"expected a finite number, got {value!r}")
    return float(value)


def _parse_pop(raw, path: str) -> PopProfile:
    if not isinstance(raw, dict):
        raise SchemaViolation(path, "expected an object")
    unknown = set(raw) - _POP_KEYS
    if unknown:
        raise SchemaViolation(path, f"unknown field(s) {sorted(unknown)}")
    missing = _POP_REQUIRED - set(raw)
    if missing:
        raise SchemaViolation(path, f"missing field(s) {sorted(missing)}")
    pop_id = raw["pop_id"]
    if not isinstance(pop_id, str) or not pop_id:
        raise SchemaViolation(f"{path}.pop_id", "expected a non-empty string")
    lat = _number(raw["lat"], f"{path}.lat")
    lon = _number(raw["lon"], f"{path}.lon")
    if not -90 <= lat <= 90 or not -180 <= lon <= 180:
        raise SchemaViolation(path, f"location ({lat}, {lon}) out of range")
    radius = _number(raw.get("serving_radius_km", 900.0), f"{path}.serving_radius_km")
    if radius < 0:
        raise SchemaViolation(f"{path}.serving_radius_km", "must be >= 0")

    weather = raw["weather"]
    if not isinstance(weather, dict) or not weather:
        raise SchemaViolation(f"{path}.weather", "expected a non-empty object")
    loss, delay = {}, {}
    for cls, entry in weather.items():
        wpath = f"{path}.weather.{cls}"
        if cls not in WEATHER_CLASSES:
            raise SchemaViolation(wpath, f"unknown weather class (expected one of {WEATHER_CLASSES})")
        if not isinstance(entry, dict) or set(entry) != _WEATHER_KEYS:
            raise SchemaViolation(wpath, f"expected exactly {sorted(_WEATHER_KEYS)}")
        lr = _number(entry["loss_rate"], f"{wpath}.loss_rate")
        dl = _number(entry["delay_ms"], f"{wpath}.delay_ms")
        if not 0.0 <= lr < 1.0:
            raise SchemaViolation(f"{wpath}.loss_rate", f"{lr} not in [0, 1)")
        if not dl > 0.0:
            raise SchemaViolation(f"{wpath}.delay_ms", f"{dl} must be > 0")
        loss[cls], delay[cls] = lr, dl

    tiers = raw["tier_rates"]
    if not isinstance(tiers, dict) or not tiers:
        raise SchemaViolation(f"{path}.tier_rates", "expected a non-empty object")
    rates = {}
    for tier, rate in tiers.items():
        if tier not in TIERS:
            raise SchemaViolation(f"{path}.tier_rates.{tier}", f"unknown tier (expected one of {TIERS})")
        rates[tier] = _number(rate, f"{path}.tier_rates.{tier}")
        if rates[tier] <= 0:
            raise SchemaViolation(f"{path}.tier_rates.{tier}", "rate must be > 0")
    return PopProfile(pop_id, lat, lon, loss, delay, rates, radius)


def load_pop_profiles(source: str | Path | IO[str]) -> list[PopProfile]:
    """Read and validate a versioned PoP profile file (JSON)."""
    if isinstance(source, (str, Path)):
        text = Path(source).read_text(encoding="utf-8")
    else:
        text = source.read()
    if not text.strip():
        return []
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaViolation("$", f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise SchemaViolation("$", "expected an object")
    unknown = set(doc) - _TOP_KEYS
    if unknown:
        raise SchemaViolation("$", f"unknown field(s) {sorted(unknown)}")
    if doc.get("schema_version") != PROFILE_SCHEMA_VERSION:
        raise SchemaViolation("$.schema_version", f"unsupported version {doc.get('schema_version')!r}")
    pops = doc.get("pops", [])
    if not isinstance(pops, list):
        raise SchemaViolation("$.pops", "expected a list")
    out = [_parse_pop(p, f"$.pops[{i}]") for i, p in enumerate(pops)]
    ids = [p.pop_id for p in out]
    if len(set(ids)) != len(ids):
        raise SchemaViolation("$.pops", "duplicate pop_id")
    return out


# -- weather -----------------------------------------------------------------------------

class WeatherTrace:
    """Piecewise-constant weather per location; before the first row it is clear."""

    def __init__(self, rows: Iterable[tuple[str, datetime, str]] = (), default: str = "clear"):
        self.default = default
        series: dict[str, list[tuple[datetime, str]]] = {}
        for loc, at, cls in rows:
            if cls not in WEATHER_CLASSES:
                raise UnknownWeatherClass(cls)
            series.setdefault(loc, []).append((at, cls))
        self._times = {}
        self._classes = {}
        for loc, items in series.items():
            items.sort(key=lambda x: x[0])
            self._times[loc] = [t for t, _ in items]
            self._classes[loc] = [c for _, c in items]

    def at(self, location_id: str, epoch: datetime) -> str:
        times = self._times.get(location_id)
        if not times:
            return self.default
        k = bisect.bisect_right(times, epoch) - 1
        return self._classes[location_id][k] if k >= 0 else self.default

    @classmethod
    def read_csv(cls, source: str | Path | IO[str]) -> "WeatherTrace":
        fh = open(source, newline="", encoding="utf-8") if isinstance(source, (str, Path)) else source
        try:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None:
                return cls()
            want = {"location_id", "epoch_utc", "weather_class"}
            if set(reader.fieldnames) != want:
                raise SchemaViolation("weather", f"expected columns {sorted(want)}, got {reader.fieldnames}")
            rows = [(r["location_id"], parse_utc(r["epoch_utc"]), r["weather_class"]) for r in reader]
        finally:
            if isinstance(source, (str, Path)):
                fh.close()
        return cls(rows)


CLEAR_SKY = WeatherTrace()


# -- routes ---------------------------------------------------------------------------------

def pop_route_quality(profile: PopProfile, weather_class: str, tier: str, isl_km: float,
                      isl_model: IslModel = IslModel(), radio: RadioConfig = RadioConfig()) -> RouteQuality:
    """Loss and delay of a route to ``profile`` that spans ``isl_km`` of laser links."""
    if weather_class not in profile.loss_rate:
        raise UnknownWeatherClass(weather_class)
    if tier not in profile.tier_rates:
        raise UnknownTier(tier)
    isl_km = max(0.0, float(isl_km))
    loss = profile.loss_rate[weather_class] + isl_km * isl_model.loss_per_km
    loss = min(max(loss, 0.0), _MAX_LOSS)
    delay = profile.delay_ms[weather_class] + isl_km * isl_model.delay_per_km
    bits = profile.tier_rates[tier] * radio.session_seconds * (1.0 - loss)
    return RouteQuality(loss, delay, None, bits, isl_km)


def isl_distance_km(lat: float, lon: float, profile: PopProfile) -> float:
    """Laser-link span from a subpoint to the edge of the PoP's bent-pipe region."""
    return max(0.0, float(great_circle_km(lat, lon, profile.lat, profile.lon)) - profile.serving_radius_km)


def _route_key(pop_id: str, q: RouteQuality):
    return (-q.deliverable_bits, q.delay_ms, pop_id)


def space_user_route(user: StateVector, relay: StateVector, pops: Sequence[PopProfile],
                     weather: WeatherTrace = CLEAR_SKY, radio: RadioConfig = RadioConfig(),
                     isl_model: IslModel = IslModel(), tier: str = "Business",
                     tracked_speed: float = 7.4) -> tuple[str, RouteQuality]:
    """Best PoP for traffic relayed by ``relay`` and the resulting route quality.

    The relay is projected to its subpoint and every PoP is scored as if a
    ground user stood there under clear sky, with the PoP's own weather on the
    down segment and ISL cost for the span to the PoP's serving region.  The
    user-to-relay leg contributes the SNR (path-loss delta plus CFO from the
    speed in excess of ``tracked_speed``).
    """
    if not pops:
        raise NoPopAvailable("empty PoP list")
    lat, lon = subpoint(relay.position, relay.epoch)
    best = None
    for p in pops:
        q = pop_route_quality(p, weather.at(p.pop_id, relay.epoch), tier,
                              isl_distance_km(float(lat), float(lon), p), isl_model, radio)
        if best is None or _route_key(p.pop_id, q) < _route_key(*best):
            best = (p.pop_id, q)
    pop_id, q = best

    d, v, _ = relative_kinematics(user.position, user.velocity, relay.position, relay.velocity)
    residual = max(float(v) - tracked_speed, 0.0)
    eps = doppler_epsilon(residual, radio)
    snr = link_snr_db(max(float(d), 1e-3), residual, radio) if eps < 0.5 else None
    return pop_id, RouteQuality(q.loss_rate, q.delay_ms, snr, q.deliverable_bits, q.isl_km, eps)


@dataclass
class RouteTable:
    """Best route per relay, for many relays at one instant."""

    pop_index: np.ndarray
    loss_rate: np.ndarray
    delay_ms: np.ndarray
    deliverable_bits: np.ndarray
    isl_km: np.ndarray


def best_routes(lat: np.ndarray, lon: np.ndarray, pops: Sequence[PopProfile], weather_classes: Sequence[str],
                tier: str, radio: RadioConfig = RadioConfig(), isl_model: IslModel = IslModel()) -> RouteTable:
    """Vectorized PoP choice for relay subpoints; same ordering rule as :func:`space_user_route`."""
    if not pops:
        raise NoPopAvailable("empty PoP list")
    lat = np.asarray(lat, dtype=float)
    lon = np.asarray(lon, dtype=float)
    k = len(pops)
    isl = np.empty((lat.size, k))
    loss = np.empty_like(isl)
    delay = np.empty_like(isl)
    bits = np.empty_like(isl)
    for j, (p, w) in enumerate(zip(pops, weather_classes)):
        if w not in p.loss_rate:
            raise UnknownWeatherClass(w)
        if tier not in p.tier_rates:
            raise UnknownTier(tier)
        isl[:, j] = np.maximum(0.0, great_circle_km(lat, lon, p.lat, p.lon) - p.serving_radius_km)
        loss[:, j] = np.clip(p.loss_rate[w] + isl[:, j] * isl_model.loss_per_km, 0.0, _MAX_LOSS)
        delay[:, j] = p.delay_ms[w] + isl[:, j] * isl_model.delay_per_km
        bits[:, j] = p.tier_rates[tier] * radio.session_seconds * (1.0 - loss[:, j])
    # lexicographic: max bits, min delay, then pop_id; PoPs are visited in
    # name order and only a strictly better route replaces the incumbent
    order = np.argsort([p.pop_id for p in pops], kind="stable")
    rows = np.arange(lat.size)
    best = np.full(lat.size, order[0], dtype=np.int64)
    for j in order[1:]:
        b_bits, b_delay = bits[rows, best], delay[rows, best]
        better = (bits[:, j] > b_bits) | ((bits[:, j] == b_bits) & (delay[:, j] < b_delay))
        best = np.where(better, j, best)
    return RouteTable(best, loss[rows, best], delay[rows, best], bits[rows, best], isl[rows, best])
