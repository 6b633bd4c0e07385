from __future__ import annotations

from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path

import pytest

from spaceuser.linkquality import WeatherTrace, load_pop_profiles
from spaceuser.scenario import data_path
from spaceuser.tle import parse_tle_records, read_tle

FIXTURES = Path(__file__).parent / "fixtures"
SCENARIOS = data_path("scenarios")
T0 = datetime(2025, 3, 1, tzinfo=timezone.utc)


@lru_cache(maxsize=None)
def bundled(name: str):
    return tuple(read_tle(data_path(name)))


@lru_cache(maxsize=None)
def pops():
    return tuple(load_pop_profiles(data_path("pops.json")))


@lru_cache(maxsize=None)
def weather():
    return WeatherTrace.read_csv(data_path("weather.csv"))


def fixture_sat(name: str):
    return next(s for s in bundled("eo_fixtures.tle") if s.name == name)


@lru_cache(maxsize=None)
def verification_sets():
    """Near-Earth records of the published verification file, by catalog id."""
    records, _ = parse_tle_records((FIXTURES / "SGP4-VER.TLE").read_bytes())
    return {r.catalog_id: r for r in records}


@lru_cache(maxsize=None)
def reference_ephemeris():
    """catalog id -> list of (tsince min, r[3], v[3]) from the published output table."""
    table: dict[int, list] = {}
    current = None
    for line in (FIXTURES / "tcppver.out").read_text().splitlines():
        parts = line.split()
        if len(parts) == 2 and parts[1] == "xx":
            current = int(parts[0])
            table[current] = []
        elif current is not None and len(parts) >= 7:
            try:
                vals = [float(x) for x in parts[:7]]
            except ValueError:
                continue
            table[current].append((vals[0], vals[1:4], vals[4:7]))
    return table


@pytest.fixture
def t0():
    return T0


@lru_cache(maxsize=None)
def snapshot_batch():
    from spaceuser.sgp4 import Sgp4Batch
    return Sgp4Batch(list(bundled("relays_snapshot.tle")))


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
