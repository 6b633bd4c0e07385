"""End-to-end session loop: propagation, selection, routing, scheduling, backlog."""

from __future__ import annotations

import csv
import io
import json
import os
import shutil
import tempfile
from dataclasses import asdict, dataclass, field, replace
from datetime import timedelta
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import EmptyInput, SpaceUserError
from .frames import subpoint, teme_to_ecef
from .geometry import Region
from .linkquality import CLEAR_SKY, WeatherTrace, best_routes, load_pop_profiles
from .scenario import ScenarioConfig, scenario_summary
from .scheduler import build_session, solve_session, write_plan_rows
from .selection import rank, usable_mask
from .sgp4 import Sgp4Batch
from .tle import OrbitalElements, parse_tle_file
from .waittransfer import ContactState, WaitAndTransferConfig, assign_antennas, station_elevations

SECONDS_PER_DAY = 86400


@dataclass
class BacklogLedger:
    user_id: str
    initial_bits: int = 0
    generated_bits: int = 0
    delivered_bits: int = 0
    backlog_bits: int = 0
    disconnected_sessions: int = 0
    switch_count: int = 0

    def balanced(self) -> bool:
        return (self.backlog_bits == self.initial_bits + self.generated_bits - self.delivered_bits
                and self.backlog_bits >= 0)


@dataclass
class SimulationReport:
    name: str
    mode: str
    seed: int
    sessions: int
    ledgers: list[BacklogLedger]
    median_backlog_bits: float
    p90_backlog_bits: float
    delivered_fraction: float
    total_generated_bits: int
    total_delivered_bits: int
    total_switches: int
    disconnected_sessions: int
    mean_connection_seconds: float
    relay_connected_seconds: dict = field(default_factory=dict)
    quarantined: list = field(default_factory=list)
    plan_rows: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    config: dict = field(default_factory=dict)

    def cdf(self) -> list[tuple[int, float]]:
        """Empirical CDF samples of end-of-run backlog."""
        vals = sorted(l.backlog_bits for l in self.ledgers)
        n = len(vals)
        return [(v, (k + 1) / n) for k, v in enumerate(vals)]

    def summary(self) -> dict:
        return {
            "name": self.name,
            "mode": self.mode,
            "seed": self.seed,
            "sessions": self.sessions,
            "users": len(self.ledgers),
            "median_backlog_bits": self.median_backlog_bits,
            "median_backlog_gb": self.median_backlog_bits / 8e9,
            "p90_backlog_bits": self.p90_backlog_bits,
            "p90_backlog_gb": self.p90_backlog_bits / 8e9,
            "delivered_fraction": self.delivered_fraction,
            "total_generated_bits": self.total_generated_bits,
            "total_delivered_bits": self.total_delivered_bits,
            "total_switches": self.total_switches,
            "disconnected_sessions": self.disconnected_sessions,
            "mean_connection_seconds": self.mean_connection_seconds,
            "quarantined": self.quarantined,
            "notes": self.notes,
            "config": self.config,
        }


def summarize(ledgers: Sequence[BacklogLedger], connection_runs: Sequence[float] = (), **kw) -> SimulationReport:
    """Backlog quantiles (linear interpolation) and aggregate delivery figures."""
    if not ledgers:
        raise EmptyInput("no ledgers to summarize")
    backlog = np.array([l.backlog_bits for l in ledgers], dtype=float)
    generated = sum(l.generated_bits for l in ledgers)
    delivered = sum(l.delivered_bits for l in ledgers)
    return SimulationReport(
        name=kw.pop("name", "scenario"), mode=kw.pop("mode", ""), seed=kw.pop("seed", 0),
        sessions=kw.pop("sessions", 0), ledgers=list(ledgers),
        median_backlog_bits=float(np.percentile(backlog, 50)),
        p90_backlog_bits=float(np.percentile(backlog, 90)),
        delivered_fraction=(delivered / generated) if generated else 0.0,
        total_generated_bits=generated, total_delivered_bits=delivered,
        total_switches=sum(l.switch_count for l in ledgers),
        disconnected_sessions=sum(l.disconnected_sessions for l in ledgers),
        mean_connection_seconds=float(np.mean(connection_runs)) if len(connection_runs) else 0.0,
        **kw)


# -- inputs --------------------------------------------------------------------------------

def clone_offsets(multiplier: int) -> list[float]:
    """Mean-anomaly offsets for phase-shifted twins: 0, +s, -s, +2s, -2s, ..."""
    step = 360.0 / (multiplier + 1)
    out = [0.0]
    k = 1
    while len(out) < multiplier:
        out.append(k * step)
        if len(out) < multiplier:
            out.append(-k * step)
        k += 1
    return out


def expand_fleet(fleet: Sequence[OrbitalElements], multiplier: int) -> tuple[list[OrbitalElements], list[str]]:
    users, ids = [], []
    offsets = clone_offsets(multiplier)
    for el in fleet:
        for c, off in enumerate(offsets):
            if c == 0:
                users.append(el)
                ids.append(str(el.catalog_id))
            else:
                users.append(replace(el, mean_anomaly=(el.mean_anomaly + off) % 360.0))
                ids.append(f"{el.catalog_id}-c{c}")
    return users, ids


@dataclass
class ScenarioInputs:
    users: list[OrbitalElements]
    user_ids: list[str]
    relays: list[OrbitalElements]
    pops: list
    weather: WeatherTrace


def load_inputs(cfg: ScenarioConfig) -> ScenarioInputs:
    """Read every input file up front so ingestion errors surface before compute."""
    fleet = parse_tle_file(cfg.path(cfg.eo_tles).read_bytes())
    relays = parse_tle_file(cfg.path(cfg.relay_tles).read_bytes())
    if not fleet:
        raise EmptyInput(f"no EO satellites in {cfg.eo_tles}")
    pops = load_pop_profiles(cfg.path(cfg.pops))
    weather = WeatherTrace.read_csv(cfg.path(cfg.weather)) if cfg.weather else CLEAR_SKY
    users, ids = expand_fleet(fleet, cfg.eo_multiplier)
    return ScenarioInputs(users, ids, relays, pops, weather)


# -- perturbations --------------------------------------------------------------------------

def apply_scenario_perturbation(cfg: ScenarioConfig, session_index: int, rng: np.random.Generator,
                                regions: Sequence[Region]) -> tuple[Optional[np.ndarray], np.ndarray]:
    """(capacity override or None, per-user availability mask) for one session.

    Users drop out independently with probability 1 - availability_fraction;
    under a polar outage every user outside the dense band is cut off.
    """
    m = len(regions)
    available = np.ones(m, dtype=bool)
    if cfg.availability_fraction < 1.0:
        available &= rng.random(m) < cfg.availability_fraction
    if cfg.polar_outage:
        available &= np.array([r == Region.INSIDE for r in regions], dtype=bool)
    return None, available


# -- main loop --------------------------------------------------------------------------------

def _generation_schedule(rate_per_day: int, session_seconds: int, n_sessions: int) -> np.ndarray:
    """Integer bits generated in each session, so the cumulative total is floor(rate * t)."""
    t = np.arange(n_sessions + 1, dtype=object) * session_seconds
    cum = np.array([rate_per_day * int(x) // SECONDS_PER_DAY for x in t], dtype=np.int64)
    return np.diff(cum)


class _Runs:
    """Contiguous (user, relay) link runs, for connection-time statistics."""

    def __init__(self, m: int):
        self.current = np.full(m, -1, dtype=np.int64)
        self.length = np.zeros(m, dtype=np.int64)
        self.closed: list[int] = []

    def step(self, relay_of_user: np.ndarray):
        changed = relay_of_user != self.current
        ended = changed & (self.current >= 0)
        self.closed.extend(int(x) for x in self.length[ended])
        self.length = np.where(changed, (relay_of_user >= 0).astype(np.int64), self.length + 1)
        self.current = relay_of_user.copy()

    def finish(self) -> list[int]:
        tail = [int(x) for x in self.length[self.current >= 0]]
        return self.closed + tail


def run_scenario(cfg: ScenarioConfig, seed: int = 0, inputs: Optional[ScenarioInputs] = None,
                 record_plan: bool = True, on_session: Optional[Callable] = None) -> SimulationReport:
    """Simulate ``cfg`` deterministically for ``seed``.

    ``on_session(t, backlog, generated, delivered)`` is called after every
    session with copies of the per-user integer counters.
    """
    cfg.validate()
    inputs = inputs or load_inputs(cfg)
    if cfg.baseline is not None:
        return run_wait_and_transfer(cfg.baseline_config(), inputs, cfg, seed, on_session)

    sel = cfg.selection_config()
    radio = sel.radio
    isl = cfg.isl_model()
    start = cfg.start_time
    n_sessions = cfg.n_sessions
    m, n = len(inputs.users), len(inputs.relays)
    relay_ids = np.array([r.catalog_id for r in inputs.relays], dtype=np.int64)

    ubatch = Sgp4Batch(inputs.users, cfg.gravity)
    rbatch = Sgp4Batch(inputs.relays, cfg.gravity) if n else None
    user_alive = np.ones(m, dtype=bool)
    relay_alive = np.ones(n, dtype=bool)
    quarantined = []

    avail_rng = np.random.default_rng([seed, 1])
    pick_rng = np.random.default_rng([seed, 2])
    gen = _generation_schedule(int(cfg.generation_rate), cfg.session_seconds, n_sessions)

    initial = int(cfg.initial_backlog)
    backlog = np.full(m, initial, dtype=np.int64)
    generated = np.zeros(m, dtype=np.int64)
    delivered = np.zeros(m, dtype=np.int64)
    disconnected = np.zeros(m, dtype=np.int64)
    switches = np.zeros(m, dtype=np.int64)
    capacity = np.full(n, cfg.relay_capacity, dtype=np.int64)
    previous = np.zeros((n, m), dtype=bool)
    runs = _Runs(m)
    relay_seconds = np.zeros(n, dtype=np.int64)
    plan_rows = []
    keep = 1.0 - cfg.penalty_fraction

    for t in range(n_sessions):
        at = start + timedelta(seconds=t * cfg.session_seconds)
        ur, uv, uerr = ubatch.propagate(at)
        for k in np.flatnonzero((uerr != 0) & user_alive):
            quarantined.append({"kind": "eo", "id": inputs.user_ids[k], "session": t, "code": int(uerr[k])})
        user_alive &= uerr == 0
        ulat = np.nan_to_num(subpoint(ur, at)[0])
        regions = [Region.INSIDE if abs(x) <= sel.ssdb.boundary_lat else Region.OUTSIDE for x in ulat]
        _, available = apply_scenario_perturbation(cfg, t, avail_rng, regions)
        available &= user_alive

        relay_of_user = np.full(m, -1, dtype=np.int64)
        link_bits = np.zeros(m, dtype=np.int64)
        pops_of_relay = None
        if n and inputs.pops:
            rr, rv, rerr = rbatch.propagate(at)
            for k in np.flatnonzero((rerr != 0) & relay_alive):
                quarantined.append({"kind": "relay", "id": int(relay_ids[k]), "session": t, "code": int(rerr[k])})
            relay_alive &= rerr == 0
            rlat, rlon = subpoint(np.nan_to_num(rr), at)
            wx = [inputs.weather.at(p.pop_id, at) for p in inputs.pops]
            routes = best_routes(rlat, rlon, inputs.pops, wx, cfg.tier, radio, isl)
            pops_of_relay = routes.pop_index
            deliverable = np.where(relay_alive, routes.deliverable_bits, 0.0)

            # candidate pools per user
            feasible = np.zeros((n, m), dtype=bool)
            pools = [np.empty(0, dtype=np.int64)] * m
            dr = rr[None, :, :] - ur[:, None, :]
            dv = rv[None, :, :] - uv[:, None, :]
            dist = np.sqrt(np.einsum("ijk,ijk->ij", dr, dr))
            speed = np.sqrt(np.einsum("ijk,ijk->ij", dv, dv))
            for u in np.flatnonzero(available):
                near = np.flatnonzero((dist[u] <= sel.search_radius) & relay_alive)
                if near.size == 0:
                    continue
                order, _ = rank(regions[u], dist[u, near], speed[u, near], relay_ids[near], sel, cfg.selection_mode)
                cand = near[order]
                cand = cand[usable_mask(speed[u, cand], regions[u], sel)][: cfg.candidate_pool]
                pools[u] = cand
                feasible[cand, u] = True
            feasible &= deliverable[:, None] > 0

            if cfg.selection_mode == "random_among_selected":
                load = np.zeros(n, dtype=np.int64)
                for u in pick_rng.permutation(m):
                    cand = [j for j in pools[u] if feasible[j, u] and load[j] < capacity[j]]
                    if cand and backlog[u] > 0:
                        j = cand[int(pick_rng.integers(len(cand)))]
                        relay_of_user[u] = j
                        load[j] += 1
            else:
                problem = build_session(backlog.astype(float), np.broadcast_to(deliverable[:, None], (n, m)),
                                        feasible, capacity, previous if t else None, cfg.penalty_fraction,
                                        t, penalize_all=cfg.penalize_all)
                relay_of_user = solve_session(problem).user_relay()

            assigned = np.flatnonzero(relay_of_user >= 0)
            for u in assigned:
                j = relay_of_user[u]
                new = (t == 0) or not previous[j, u]
                value = min(float(backlog[u]), float(deliverable[j]))
                bits = int(value * keep) if (new or cfg.penalize_all) else int(value)
                link_bits[u] = min(bits, int(backlog[u]))
                switches[u] += int(new)
                if record_plan:
                    plan_rows.append((t, inputs.user_ids[u], int(relay_ids[j]), inputs.pops[pops_of_relay[j]].pop_id,
                                      int(link_bits[u]), int(new)))

        current = np.zeros((n, m), dtype=bool)
        has = relay_of_user >= 0
        current[relay_of_user[has], np.flatnonzero(has)] = True
        previous = current
        disconnected += ~has
        np.add.at(relay_seconds, relay_of_user[has], cfg.session_seconds)
        runs.step(relay_of_user)

        backlog -= link_bits
        delivered += link_bits
        backlog += gen[t]
        generated += gen[t]
        if np.any(backlog != initial + generated - delivered) or np.any(backlog < 0):
            raise SpaceUserError(f"backlog conservation violated in session {t}")
        if on_session is not None:
            on_session(t, backlog.copy(), generated.copy(), delivered.copy())

    ledgers = [BacklogLedger(inputs.user_ids[u], initial, int(generated[u]), int(delivered[u]), int(backlog[u]),
                             int(disconnected[u]), int(switches[u])) for u in range(m)]
    run_seconds = [x * cfg.session_seconds for x in runs.finish()]
    return summarize(ledgers, run_seconds, name=cfg.name, mode=cfg.selection_mode, seed=seed, sessions=n_sessions,
                     relay_connected_seconds={int(relay_ids[j]): int(s) for j, s in enumerate(relay_seconds) if s},
                     quarantined=quarantined, plan_rows=plan_rows, config=scenario_summary(cfg))


def run_wait_and_transfer(wt: WaitAndTransferConfig, inputs: ScenarioInputs, cfg: ScenarioConfig,
                          seed: int = 0, on_session: Optional[Callable] = None) -> SimulationReport:
    """Ground-station-only delivery over the same horizon and generation schedule."""
    if not wt.stations:
        raise EmptyInput("no ground stations")
    m = len(inputs.users)
    step = cfg.session_seconds
    n_steps = cfg.n_sessions
    start = cfg.start_time
    ubatch = Sgp4Batch(inputs.users, cfg.gravity)
    gen = _generation_schedule(int(cfg.generation_rate), step, n_steps)
    initial = int(cfg.initial_backlog)
    backlog = np.full(m, initial, dtype=np.int64)
    generated = np.zeros(m, dtype=np.int64)
    delivered = np.zeros(m, dtype=np.int64)
    idle = np.zeros(m, dtype=np.int64)
    contacts = np.zeros(m, dtype=np.int64)
    alive = np.ones(m, dtype=bool)
    quarantined = []
    state = ContactState.empty(len(wt.stations))
    runs = _Runs(m)
    per_step = int(wt.contact_rate * step)
    plan_rows = []
    for t in range(n_steps):
        at = start + timedelta(seconds=t * step)
        ur, _, err = ubatch.propagate(at)
        for k in np.flatnonzero((err != 0) & alive):
            quarantined.append({"kind": "eo", "id": inputs.user_ids[k], "session": t, "code": int(err[k])})
        alive &= err == 0
        elev = station_elevations(teme_to_ecef(ur, at), wt.stations)
        state = assign_antennas(elev, wt.min_elevation, wt.antennas_per_station, state, alive)
        station_of = np.full(m, -1, dtype=np.int64)
        for s, sats in enumerate(state.serving):
            station_of[sats] = s
        link_bits = np.where(station_of >= 0, np.minimum(backlog, per_step), 0)
        new_contact = (station_of >= 0) & (station_of != runs.current)
        contacts += new_contact
        runs.step(station_of)
        for u in np.flatnonzero(station_of >= 0):
            plan_rows.append((t, inputs.user_ids[u], wt.stations[station_of[u]].name, "", int(link_bits[u]),
                              int(new_contact[u])))
        idle += station_of < 0
        backlog -= link_bits
        delivered += link_bits
        backlog += gen[t]
        generated += gen[t]
        if np.any(backlog != initial + generated - delivered) or np.any(backlog < 0):
            raise SpaceUserError(f"backlog conservation violated in step {t}")
        if on_session is not None:
            on_session(t, backlog.copy(), generated.copy(), delivered.copy())
    ledgers = [BacklogLedger(inputs.user_ids[u], initial, int(generated[u]), int(delivered[u]), int(backlog[u]),
                             int(idle[u]), int(contacts[u])) for u in range(m)]
    return summarize(ledgers, [x * step for x in runs.finish()], name=cfg.name, mode="wait_and_transfer",
                     seed=seed, sessions=n_steps, quarantined=quarantined, plan_rows=plan_rows,
                     notes=["wait-and-transfer results depend on the configured contact_rate and stations"],
                     config=scenario_summary(cfg))


# -- outputs ----------------------------------------------------------------------------------

def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def report_files(report: SimulationReport) -> dict[str, str]:
    """File name -> text for the output bundle; deterministic byte content."""
    files = {
        "summary.json": json.dumps(report.summary(), indent=2, sort_keys=True, default=str) + "\n",
        "backlog_cdf.csv": _csv_text(["backlog_bits", "cdf"], [(v, repr(p)) for v, p in report.cdf()]),
        "ledger.csv": _csv_text(list(asdict(report.ledgers[0]).keys()),
                                [tuple(asdict(l).values()) for l in report.ledgers]),
        "relay_connection.csv": _csv_text(["relay_id", "connected_seconds"],
                                          sorted(report.relay_connected_seconds.items())),
    }
    buf = io.StringIO()
    write_plan_rows(buf, report.plan_rows)
    files["plan.csv"] = buf.getvalue()
    return files


def write_bundle(files: dict[str, str], out_dir: str | Path) -> Path:
    """Write all files into ``out_dir`` atomically: stage in a sibling temp dir, then rename."""
    out = Path(out_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    tmp = Path(tempfile.mkdtemp(prefix=f".{out.name}.", dir=out.parent))
    try:
        for name, text in files.items():
            (tmp / name).parent.mkdir(parents=True, exist_ok=True)
            with open(tmp / name, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        if out.exists():
            old = out.with_name(f".{out.name}.old")
            if old.exists():
                shutil.rmtree(old)
            os.replace(out, old)
            os.replace(tmp, out)
            shutil.rmtree(old)
        else:
            os.replace(tmp, out)
    except BaseException:
        shutil.rmtree(tmp, ignore_errors=True)
        raise
    return out
