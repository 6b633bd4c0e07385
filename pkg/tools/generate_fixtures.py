#!/usr/bin/env python3
"""Regenerate the bundled data files under src/spaceuser/data/.

The relay snapshot is a synthetic Starlink-like constellation laid out by
shell (inclination, altitude, planes x slots) following the publicly filed
shell structure, with small seeded jitter.  The EO fleet mimics a Planet-style
mix of sun-synchronous and ISS-deployed cubesats.  Output is deterministic.

    python tools/generate_fixtures.py
"""

from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from spaceuser.tle import OrbitalElements, format_tle

DATA = Path(__file__).resolve().parents[1] / "src" / "spaceuser" / "data"
EPOCH = datetime(2025, 3, 1, tzinfo=timezone.utc)
MU = 398600.8
RE = 6378.135
J2 = 0.001082616
SEED = 20250301

# (label, inclination deg, altitude km, planes, slots per plane, raan offset deg, walker F)
RELAY_SHELLS = [
    ("G1-53.0", 53.0, 550.0, 72, 22, 0.0, 17),
    ("G4-53.2", 53.2, 540.0, 72, 22, 2.5, 39),
    ("G2-70", 70.0, 570.0, 36, 20, 0.0, 11),
    ("G3-97.6a", 97.6, 560.0, 6, 58, 0.0, 1),
    ("G3-97.6b", 97.6, 560.0, 4, 43, 45.0, 1),
    ("G6-43", 43.0, 530.0, 36, 46, 1.0, 23),
    ("G7-53.05", 53.05, 559.0, 28, 35, 3.0, 5),
    ("G9-33", 33.0, 525.0, 1, 17, 120.0, 0),
]


def mean_motion(alt_km: float) -> float:
    a = RE + alt_km
    return math.sqrt(MU / a ** 3) * 86400.0 / (2.0 * math.pi)


def raan_rate_deg_day(alt_km: float, inc_deg: float) -> float:
    a = RE + alt_km
    n = math.sqrt(MU / a ** 3)
    return math.degrees(-1.5 * n * J2 * (RE / a) ** 2 * math.cos(math.radians(inc_deg))) * 86400.0


def element(catalog_id, name, inc, alt, raan, ma, rng, epoch_jitter_h=8.0, ecc=None, bstar=None):
    """Elements describing the given (raan, ma) at EPOCH, expressed at a jittered epoch."""
    dt_days = -rng.uniform(0.0, epoch_jitter_h) / 24.0
    n = mean_motion(alt)
    epoch = EPOCH + timedelta(days=dt_days)
    # round-trip through the 8-decimal TLE day field
    day0 = datetime(epoch.year, 1, 1, tzinfo=timezone.utc)
    doy = round((epoch - day0).total_seconds() / 86400.0, 8)
    epoch = day0 + timedelta(days=doy)
    dt_days = (epoch - EPOCH).total_seconds() / 86400.0
    ma_e = (ma + 360.0 * n * dt_days) % 360.0
    raan_e = (raan + raan_rate_deg_day(alt, inc) * dt_days) % 360.0
    return OrbitalElements(
        catalog_id=catalog_id,
        name=name,
        epoch=epoch,
        inclination=inc,
        raan=round(raan_e, 4) % 360.0,
        eccentricity=ecc if ecc is not None else float(rng.uniform(0.00008, 0.00025)),
        arg_perigee=float(rng.uniform(0.0, 360.0)) if ecc is None else 90.0,
        mean_anomaly=round(ma_e, 4) % 360.0,
        mean_motion=round(n, 8),
        bstar=bstar if bstar is not None else float(rng.uniform(0.5e-4, 3.0e-4)),
        ndot=float(rng.uniform(0.0, 2.0e-5)),
    )


def relays(rng) -> list[OrbitalElements]:
    out = []
    cat = 44001
    for label, inc, alt, planes, slots, raan0, f in RELAY_SHELLS:
        for p in range(planes):
            raan = raan0 + 360.0 * p / planes + rng.normal(0.0, 0.15)
            for s in range(slots):
                ma = 360.0 * s / slots + 360.0 * f * p / (planes * slots) + rng.normal(0.0, 0.4)
                a = alt + rng.normal(0.0, 1.5)
                out.append(element(cat, f"STARLINK-SYN-{cat - 44000:04d}", inc, a, raan % 360.0, ma % 360.0, rng))
                cat += 1
    return out


def eo_fleet(rng) -> list[OrbitalElements]:
    """113 Planet-like EO satellites: SSO flocks plus ISS-deployed ones."""
    out = []
    cat = 60001
    # (count, inclination, altitude, raan) per deployment group
    groups = [
        (22, 97.45, 475.0, 196.0),
        (18, 97.50, 500.0, 232.0),
        (16, 97.40, 490.0, 311.0),
        (14, 97.55, 515.0, 16.0),
        (10, 97.48, 525.0, 88.0),
        (8, 97.42, 480.0, 140.0),
        (25, 51.64, 410.0, 260.0),
    ]
    for count, inc, alt, raan in groups:
        for k in range(count):
            ma = 360.0 * k / count + rng.normal(0.0, 2.0)
            a = alt + rng.normal(0.0, 3.0)
            r = raan + rng.normal(0.0, 0.5)
            out.append(element(cat, f"FLOCK-SYN-{cat - 60000:03d}", inc, a, r % 360.0, ma % 360.0, rng))
            cat += 1
    return out


def eo_fixtures(rng) -> list[OrbitalElements]:
    """Single-satellite fixtures used by the orbital-analysis traces."""
    return [
        element(70001, "EO-MIDLAT-53", 53.0, 475.0, 40.0, 10.0, rng, 0.0, ecc=0.0005),
        # polar plane within a few degrees of one of the 97.6 deg relay planes
        element(70002, "EO-POLAR-SSO", 97.5, 500.0, 62.0, 200.0, rng, 0.0, ecc=0.0005),
        element(70003, "EO-EQUATORIAL", 6.0, 500.0, 10.0, 0.0, rng, 0.0, ecc=0.0005),
        element(70004, "EO-CIRCULAR", 45.0, 500.0, 120.0, 0.0, rng, 0.0, ecc=0.0, bstar=0.0),
    ]


def write(path: Path, records):
    with path.open("w", encoding="ascii") as fh:
        for el in records:
            l1, l2 = format_tle(el, intl_designator="25001A", element_set=999)
            fh.write(f"{el.name}\n{l1}\n{l2}\n")
    print(f"wrote {path} ({len(records)} records)")


POPS = [
    # pop_id, lat, lon, clear loss, clear delay ms
    ("Seattle", 47.61, -122.33, 0.0045, 29.0),
    ("New York", 40.71, -74.01, 0.0030, 33.0),
    ("Chicago", 41.88, -87.63, 0.0055, 38.0),
    ("Denver", 39.74, -104.99, 0.0050, 35.0),
    ("Dallas", 32.78, -96.80, 0.0060, 48.0),
    ("Frankfurt", 50.11, 8.68, 0.0027, 27.0),
    ("Lagos", 6.45, 3.39, 0.0110, 62.0),
]
# relative loss / delay increase per weather class; rain matches the +36.44%
# clear-vs-rain increase measured at Seattle
WEATHER_LOSS = {"clear": 1.0, "cloud": 1.15, "rain": 1.3644, "snow": 1.50}
WEATHER_DELAY = {"clear": 1.0, "cloud": 1.06, "rain": 1.12, "snow": 1.25}
# tier ratios follow the per-tier rate-error ratios (Standard:Roam:Priority:Business = 1:4/3:2.2:4)
TIER_RATES = {"Standard": 7.5e6, "Roam": 1.0e7, "Priority": 1.65e7, "Business": 3.0e7}


def pop_profiles():
    pops = []
    for pop_id, lat, lon, loss, delay in POPS:
        pops.append({
            "pop_id": pop_id,
            "lat": lat,
            "lon": lon,
            "serving_radius_km": 900.0,
            "weather": {w: {"loss_rate": round(loss * WEATHER_LOSS[w], 6),
                            "delay_ms": round(delay * WEATHER_DELAY[w], 3)} for w in WEATHER_LOSS},
            "tier_rates": TIER_RATES,
        })
    return {"schema_version": 1, "pops": pops}


# per-PoP stationary weather mix for early March (clear, cloud, rain, snow)
WEATHER_MIX = {
    "Seattle": (0.25, 0.35, 0.35, 0.05),
    "New York": (0.45, 0.30, 0.15, 0.10),
    "Chicago": (0.35, 0.35, 0.10, 0.20),
    "Denver": (0.55, 0.25, 0.05, 0.15),
    "Dallas": (0.60, 0.25, 0.15, 0.00),
    "Frankfurt": (0.35, 0.40, 0.20, 0.05),
    "Lagos": (0.70, 0.20, 0.10, 0.00),
}


def weather_rows(rng, hours=72):
    classes = ["clear", "cloud", "rain", "snow"]
    rows = []
    for pop_id, mix in WEATHER_MIX.items():
        state = int(rng.choice(4, p=mix))
        for h in range(hours):
            # persistent weather: keep the class with prob 0.8, else redraw from the mix
            if h and rng.random() > 0.8:
                state = int(rng.choice(4, p=mix))
            t = EPOCH + timedelta(hours=h)
            rows.append((pop_id, t.strftime("%Y-%m-%dT%H:%M:%SZ"), classes[state]))
    return rows


def main():
    rng = np.random.default_rng(SEED)
    DATA.mkdir(parents=True, exist_ok=True)
    rel = relays(rng)
    write(DATA / "relays_snapshot.tle", rel)
    write(DATA / "relays_1000.tle", rel[:: len(rel) // 1000][:1000])
    fleet = eo_fleet(rng)
    write(DATA / "eo_fleet.tle", fleet)
    idx = [round(k * len(fleet) / 20) for k in range(20)]
    write(DATA / "eo_desk.tle", [fleet[i] for i in idx])
    write(DATA / "eo_fixtures.tle", eo_fixtures(rng))
    (DATA / "pops.json").write_text(json.dumps(pop_profiles(), indent=2) + "\n")
    with (DATA / "weather.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["location_id", "epoch_utc", "weather_class"])
        w.writerows(weather_rows(rng))
    print("wrote pops.json, weather.csv")


if __name__ == "__main__":
    main()
