"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 ingestion/configuration error,
3 runtime failure.  Outputs are staged and renamed into place, so a failed
run leaves no partial bundle behind.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import re
import sys
from datetime import datetime, timedelta
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, SchemaViolation, SpaceUserError, TleError
from .geometry import Region, density_grid_from_positions
from .scenario import apply_overrides, load_scenario, resolve_path
from .selection import MODES, SelectionConfig, selection_trace
from .sgp4 import Sgp4Batch, raise_for_error
from .sim import report_files, run_scenario, write_bundle
from .timeutil import format_utc, parse_utc
from .tle import parse_tle_file, parse_tle_records

EXIT_OK, EXIT_USAGE, EXIT_INGEST, EXIT_RUNTIME = 0, 1, 2, 3
OUT_ENV = "SPACEUSER_OUT"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _out_dir(args) -> Path:
    out = args.out or os.environ.get(OUT_ENV)
    if not out:
        raise UsageError("no output directory (use --out or set SPACEUSER_OUT)")
    return Path(out)


def _read_tle(path: str):
    return parse_tle_file(resolve_path(path, None).read_bytes())


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def _parse_duration(text: str) -> timedelta:
    m = re.fullmatch(r"\s*(\d+(?:\.\d+)?)\s*([smhd]?)\s*", text)
    if not m:
        raise UsageError(f"bad duration {text!r} (examples: 7200, 90m, 2h)")
    scale = {"": 1, "s": 1, "m": 60, "h": 3600, "d": 86400}[m.group(2)]
    return timedelta(seconds=float(m.group(1)) * scale)


def _window(text: str, default_start: datetime) -> tuple[datetime, datetime]:
    try:
        if "/" in text:
            a, b = text.split("/", 1)
            return parse_utc(a), parse_utc(b)
        return default_start, default_start + _parse_duration(text)
    except ValueError as exc:
        raise UsageError(f"bad window {text!r}: {exc}") from None


# -- subcommands ---------------------------------------------------------------------------------

def cmd_validate_tle(args) -> int:
    status = EXIT_OK
    for path in args.tle:
        records, errors = parse_tle_records(resolve_path(path, None).read_bytes())
        for err in errors:
            print(f"{path}: {err}", file=sys.stderr)
        print(f"{path}: {len(records)} accepted, {len(errors)} rejected")
        if errors:
            status = EXIT_INGEST
    return status


def cmd_density(args) -> int:
    out = _out_dir(args)
    sats = _read_tle(args.tle)
    if not sats:
        raise SpaceUserError(f"{args.tle}: no satellites")
    at = parse_utc(args.epoch) if args.epoch else max(s.epoch for s in sats)
    batch = Sgp4Batch(sats, args.gravity)
    r, _, err = batch.propagate(at)
    raise_for_error(batch, err, at)
    grid = density_grid_from_positions(r, at, args.cell_size)
    buf = io.StringIO()
    grid.write_csv(buf)
    inside = grid.zonal_sum(0.0, args.boundary)
    write_bundle({"density.csv": buf.getvalue(),
                  "density_summary.json": json.dumps({
                      "epoch": format_utc(at), "cell_size": args.cell_size, "satellites": grid.total,
                      "inside_fraction": inside / grid.total, "boundary_lat": args.boundary,
                  }, indent=2, sort_keys=True) + "\n"}, out)
    print(f"{grid.total} satellites in {len(grid.counts)} cells; {inside / grid.total:.3f} within "
          f"+/-{args.boundary:g} deg -> {out}")
    return EXIT_OK


def _cdf_rows(values: np.ndarray, points: int = 101) -> list[tuple[float, float]]:
    if values.size == 0:
        return []
    qs = np.linspace(0.0, 1.0, points)
    return [(f"{q:.2f}", f"{v:.6f}") for q, v in zip(qs, np.quantile(values, qs))]


def cmd_trace_selection(args) -> int:
    out = _out_dir(args)
    eos = _read_tle(args.tle)
    relays = _read_tle(args.relays)
    if args.eo_name:
        eos = [e for e in eos if e.name == args.eo_name or str(e.catalog_id) == args.eo_name]
    if not eos:
        raise SpaceUserError("no matching EO satellite")
    user = eos[0]
    start = parse_utc(args.start) if args.start else user.epoch
    t0, t1 = _window(args.window, start)
    step = _parse_duration(args.step).total_seconds()
    if step <= 0 or t1 < t0:
        raise UsageError("need step > 0 and a non-empty window")
    cfg = SelectionConfig(search_radius=args.radius)
    trace = selection_trace(user, relays, t0, t1, step, cfg, args.strategy, args.gravity)

    buf = io.StringIO()
    trace.write_csv(buf)
    speeds = trace.speeds()
    outside = trace.speeds(Region.OUTSIDE)
    summary = {
        "eo": user.name, "strategy": args.strategy, "start": format_utc(t0), "end": format_utc(t1),
        "step_seconds": step, "steps": len(trace.steps),
        "connected_steps": int(speeds.size),
        "max_relative_speed_kms": float(speeds.max()) if speeds.size else None,
        "median_relative_speed_kms": float(np.median(speeds)) if speeds.size else None,
        "p95_abs_dev_from_vg_kms": float(np.percentile(np.abs(speeds - cfg.v_ground), 95)) if speeds.size else None,
        "outside_median_relative_speed_kms": float(np.median(outside)) if outside.size else None,
        "median_distance_km": float(np.median(trace.distances())) if speeds.size else None,
        "mean_connection_seconds": trace.mean_connection_time(),
        "sessions": len(trace.session_lengths()),
        "note": "a reconnection to the same relay after a gap counts as a new session",
    }
    write_bundle({
        "trace.csv": buf.getvalue(),
        "trace_summary.json": json.dumps(summary, indent=2, sort_keys=True) + "\n",
        "speed_cdf.csv": _csv(["quantile", "relative_speed_kms"], _cdf_rows(speeds)),
        "distance_cdf.csv": _csv(["quantile", "distance_km"], _cdf_rows(trace.distances())),
        "session_lengths.csv": _csv(["session_seconds"], [(f"{x:g}",) for x in trace.session_lengths()]),
    }, out)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def _scenario(args):
    cfg = load_scenario(resolve_path(args.scenario, None))
    return apply_overrides(cfg, args.set or [])


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    cfg = _scenario(args)
    report = run_scenario(cfg, args.seed)
    write_bundle(report_files(report), out)
    s = report.summary()
    print(f"{cfg.name}: median backlog {s['median_backlog_gb']:.2f} GB, p90 {s['p90_backlog_gb']:.2f} GB, "
          f"delivered {s['delivered_fraction']:.3f}, switches {s['total_switches']} -> {out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    out = _out_dir(args)
    base = _scenario(args)
    if "=" not in args.vary:
        raise UsageError("--vary expects key=v1,v2,...")
    key, values = args.vary.split("=", 1)
    values = [v for v in values.split(",") if v != ""]
    if not values:
        raise UsageError("--vary needs at least one value")
    cfgs = [apply_overrides(base, [f"{key}={v}"]) for v in values]  # validate all before compute
    files, rows = {}, []
    for v, cfg in zip(values, cfgs):
        report = run_scenario(cfg, args.seed)
        for name, text in report_files(report).items():
            files[f"{key}={v}/{name}"] = text
        s = report.summary()
        rows.append((v, s["median_backlog_bits"], s["p90_backlog_bits"], repr(s["delivered_fraction"]),
                     s["total_switches"], s["total_delivered_bits"]))
    files["sweep.csv"] = _csv([key, "median_backlog_bits", "p90_backlog_bits", "delivered_fraction",
                               "total_switches", "total_delivered_bits"], rows)
    write_bundle(files, out)
    print(files["sweep.csv"], end="")
    return EXIT_OK


def cmd_report(args) -> int:
    out = _out_dir(args)
    rows = []
    for d in args.bundles:
        s = json.loads((Path(d) / "summary.json").read_text())
        rows.append((s["name"], s["mode"], s["median_backlog_bits"] / 8e9, s["p90_backlog_bits"] / 8e9,
                     s["delivered_fraction"], s["total_switches"]))
    rows.sort(key=lambda r: r[2])
    text = _csv(["name", "mode", "median_backlog_gb", "p90_backlog_gb", "delivered_fraction", "switches"],
                [(a, b, f"{c:.4f}", f"{d:.4f}", f"{e:.6f}", f) for a, b, c, d, e, f in rows])
    write_bundle({"comparison.csv": text}, out)
    print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spaceuser", description="Space-user relay simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    v = sub.add_parser("validate-tle", help="parse TLE files and report rejected records")
    v.add_argument("--tle", nargs="+", required=True)
    v.set_defaults(func=cmd_validate_tle)

    d = sub.add_parser("density", help="sub-satellite density grid")
    d.add_argument("--tle", required=True)
    d.add_argument("--cell-size", type=float, default=5.0)
    d.add_argument("--epoch", help="UTC instant (default: latest TLE epoch)")
    d.add_argument("--boundary", type=float, default=53.0)
    d.add_argument("--gravity", default="wgs72", choices=["wgs72old", "wgs72", "wgs84"])
    d.add_argument("--out")
    d.set_defaults(func=cmd_density)

    t = sub.add_parser("trace-selection", help="relay selection trace for one EO satellite")
    t.add_argument("--tle", required=True, help="EO satellite TLE file")
    t.add_argument("--relays", required=True, help="relay constellation TLE file")
    t.add_argument("--eo-name", help="name or catalog id (default: first record)")
    t.add_argument("--strategy", default="dual", choices=[m for m in MODES if m != "random_among_selected"])
    t.add_argument("--start", help="UTC start (default: EO epoch)")
    t.add_argument("--window", default="2h", help="START/END or a duration such as 2h")
    t.add_argument("--step", default="15")
    t.add_argument("--radius", type=float, default=968.0)
    t.add_argument("--gravity", default="wgs72", choices=["wgs72old", "wgs72", "wgs84"])
    t.add_argument("--out")
    t.set_defaults(func=cmd_trace_selection)

    for name, func, help_ in (("simulate", cmd_simulate, "run one scenario"),
                              ("sweep", cmd_sweep, "run a scenario over values of one key")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--scenario", required=True, help="scenario JSON (@data/scenarios/... for bundled ones)")
        s.add_argument("--seed", type=int, default=0)
        s.add_argument("--set", action="append", metavar="KEY=VALUE", help="dotted-path override (repeatable)")
        s.add_argument("--out")
        if name == "sweep":
            s.add_argument("--vary", required=True, metavar="KEY=V1,V2,...")
        s.set_defaults(func=func)

    r = sub.add_parser("report", help="compare summaries of finished bundles")
    r.add_argument("bundles", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # --help or a usage error
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"spaceuser: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (TleError, SchemaViolation, ConfigError, FileNotFoundError, IsADirectoryError,
            PermissionError, UnicodeDecodeError, KeyError, json.JSONDecodeError) as exc:
        print(f"spaceuser: input error: {exc}", file=sys.stderr)
        return EXIT_INGEST
    except (SpaceUserError, ValueError, OSError) as exc:
        print(f"spaceuser: runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
