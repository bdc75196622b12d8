"""Command-line batch runner.

Subcommands: run, compare, list-scenarios, validate.
Exit codes: 0 all checks passed, 1 numerical acceptance failure or solver error,
2 configuration or compatibility error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
import traceback
from pathlib import Path

import numpy as np

from .config import ConfigError, Scenario, bundled_scenarios
from .experiments import EXPERIMENTS, ExperimentResult, _clean, write_table
from .grid import read_snapshot

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
OUT_ENV = "OSCHYDRO_OUT"
log = logging.getLogger("oschydro")
_VOLATILE = ("wall_time_seconds", "timing", "manifest_hash", "output_dir")


class IncompatibleRuns(ValueError):
    pass


def resolve_config(ref) -> Path:
    """A path, or the name of a bundled scenario."""
    p = Path(ref)
    if p.is_file():
        return p
    bundled = bundled_scenarios()
    if str(ref) in bundled:
        return bundled[str(ref)]
    raise ConfigError(f"no config file or bundled scenario named '{ref}'")


def manifest_hash(manifest: dict) -> str:
    """sha256 of the canonical JSON of the manifest without wall-clock and location fields."""
    stable = {k: v for k, v in manifest.items() if k not in _VOLATILE}
    return hashlib.sha256(json.dumps(stable, sort_keys=True).encode()).hexdigest()


def write_json_atomic(path: Path, data: dict):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(data, indent=1, sort_keys=True))
    tmp.replace(path)


def run_scenario(config, out_root=None, workers: int = 1, seed_override: int = None) -> dict:
    """Execute the scenario's experiment; write tables, artifacts and run_manifest.json.

    Raises ConfigError before any compute if the configuration is invalid.
    """
    sc = Scenario.load(resolve_config(config))
    if seed_override is not None:
        sc.override_seeds(seed_override)
    root = Path(out_root or os.environ.get(OUT_ENV, "oschydro_runs"))
    out = root / sc.name
    out.mkdir(parents=True, exist_ok=True)
    manifest = {"scenario": _clean(sc.echo()), "name": sc.name, "experiment": sc.experiment,
                "system": sc.system, "config_hash": sc.config_hash,
                "seeds": dict(sc.sections.get("seeds", {})), "output_dir": str(out)}
    t0 = time.perf_counter()
    try:
        result: ExperimentResult = EXPERIMENTS[sc.experiment](sc, workers=workers, out_dir=out)
    except ConfigError:
        raise
    except Exception as exc:
        manifest.update(status="error", exit_code=EXIT_FAIL, error=f"{type(exc).__name__}: {exc}",
                        traceback=traceback.format_exc(limit=4),
                        wall_time_seconds=time.perf_counter() - t0)
        manifest["manifest_hash"] = manifest_hash(manifest)
        write_json_atomic(out / "run_manifest.json", manifest)
        return manifest
    tables = {}
    for name, tab in result.tables.items():
        path = out / f"{name}.csv"
        write_table(path, tab["header"], tab["rows"])
        tables[name] = path.name
    body = result.as_dict()
    manifest.update(status="pass" if result.passed else "fail",
                    exit_code=EXIT_PASS if result.passed else EXIT_FAIL,
                    checks=body["checks"], metrics=body["metrics"], diagnostics=body["diagnostics"],
                    artifacts=body["artifacts"], tables=tables, timing=_clean(result.timing),
                    wall_time_seconds=time.perf_counter() - t0)
    manifest["manifest_hash"] = manifest_hash(manifest)
    write_json_atomic(out / "run_manifest.json", manifest)
    return manifest


# ------------------------------------------------------------------ compare

def _load_manifest(ref) -> tuple:
    p = Path(ref)
    if p.is_dir():
        p = p / "run_manifest.json"
    if not p.is_file():
        raise IncompatibleRuns(f"manifest not found: {p}")
    return p.parent, json.loads(p.read_text())


def _series(base: Path, manifest: dict):
    snaps = manifest.get("snapshots")
    if not snaps:
        raise IncompatibleRuns(f"{base}: manifest lists no density snapshots")
    out = []
    for s in snaps:
        field, t = read_snapshot(base / s["file"], s.get("mode", "csv"))
        out.append((t, field))
    return out


def distance(a, b, grid, metric: str) -> float:
    d = np.abs(np.asarray(a) - np.asarray(b))
    if metric == "L1":
        return float(np.sum(d) * grid.cell_volume)
    if metric == "L2":
        return float(np.sqrt(np.sum(d * d) * grid.cell_volume))
    if metric == "Linf":
        return float(np.max(d))
    raise ValueError(f"unknown metric {metric!r}")


def compare_runs(manifest_a, manifest_b, metric: str = "L2", out_csv=None, time_tol: float = 1e-9):
    """Per-snapshot distances between two density series; returns (rows, summary)."""
    base_a, ma = _load_manifest(manifest_a)
    base_b, mb = _load_manifest(manifest_b)
    sa, sb = _series(base_a, ma), _series(base_b, mb)
    if len(sa) != len(sb):
        raise IncompatibleRuns(f"snapshot counts differ ({len(sa)} vs {len(sb)})")
    rows = []
    for i, ((ta, fa), (tb, fb)) in enumerate(zip(sa, sb)):
        if fa.grid != fb.grid:
            raise IncompatibleRuns(f"snapshot {i}: grids differ ({fa.grid.header()} vs {fb.grid.header()})")
        if abs(ta - tb) > time_tol * max(1.0, abs(ta)):
            raise IncompatibleRuns(f"snapshot {i}: times differ ({ta!r} vs {tb!r})")
        rows.append([i, ta, distance(fa.values, fb.values, fa.grid, metric)])
    summary = max(r[2] for r in rows)
    if out_csv is not None:
        write_table(out_csv, ["index", "time", f"{metric}_distance"], rows + [["summary_max", "", summary]])
    return rows, summary


# ------------------------------------------------------------------ entry point

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="oschydro", description="Oscillating-pressure hydrodynamics experiments.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run a scenario and write its manifest")
    r.add_argument("--config", required=True, help="config file path or bundled scenario name")
    r.add_argument("--out", default=None, help=f"output root (default ${OUT_ENV} or ./oschydro_runs)")
    r.add_argument("--workers", type=int, default=1)
    r.add_argument("--seed-override", type=int, default=None)
    c = sub.add_parser("compare", help="distances between two density series")
    c.add_argument("a")
    c.add_argument("b")
    c.add_argument("--metric", choices=("L1", "L2", "Linf"), default="L2")
    c.add_argument("--out", default=None, help="comparison CSV path")
    sub.add_parser("list-scenarios", help="list bundled scenarios")
    v = sub.add_parser("validate", help="parse and validate a config without running it")
    v.add_argument("--config", required=True)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "list-scenarios":
            for name, path in bundled_scenarios().items():
                sc = Scenario.load(path)
                print(f"{name:32s} {sc.experiment:32s} {sc.get('scenario', 'description', '')}")
            return EXIT_PASS
        if args.command == "validate":
            sc = Scenario.load(resolve_config(args.config))
            print(f"ok: {sc.name} ({sc.experiment}, {sc.system}) hash {sc.config_hash}")
            return EXIT_PASS
        if args.command == "compare":
            out = args.out or "comparison.csv"
            rows, summary = compare_runs(args.a, args.b, args.metric, out)
            print(f"{len(rows)} snapshots, max {args.metric} distance {summary:.6e} -> {out}")
            return EXIT_PASS
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        m = run_scenario(args.config, args.out, args.workers, args.seed_override)
        for chk in m.get("checks", []):
            print(f"{'PASS' if chk['passed'] else 'FAIL'}  {chk['name']}: {chk['value']} {chk['relation']} "
                  f"{chk['bound'] if chk['bound'] is not None else ''}")
        if m["status"] == "error":
            print(f"ERROR {m['error']}", file=sys.stderr)
        print(f"{m['status']}: {m['name']} -> {Path(m['output_dir']) / 'run_manifest.json'}")
        return m["exit_code"]
    except (ConfigError, IncompatibleRuns) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
