"""Command-line entry point: ``uvmscoop {run,validate,sweep,verify}``.

Exit codes:
  0  success
  1  verification failure or any other simulation error
  2  configuration error (unreadable, malformed or inadmissible)
  3  estimation error left its performance envelope
  4  navigation stuck at a saddle point
  5  non-finite state
"""
from __future__ import annotations

import argparse
import csv
import itertools
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import verify as verify_mod
from .config import apply_overrides, nominal_raw, parse_config, read_raw
from .engine import metrics, run_scenario, write_outputs
from .errors import ConfigError, EnvelopeViolation, NonFiniteState, StuckAtSaddle, UvmsError

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ENVELOPE, EXIT_SADDLE, EXIT_NONFINITE = 0, 1, 2, 3, 4, 5
OUT_ENV = "UVMSCOOP_OUT"

SUMMARY_METRICS = (
    "final_position_error", "final_orientation_error", "max_envelope_ratio",
    "estimation_transient_time", "observer_settling_time", "min_clearance",
    "V_violations", "z_l2", "z_l2_tail_fraction", "control_effort",
)


def exit_code(exc: BaseException) -> int:
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, EnvelopeViolation):
        return EXIT_ENVELOPE
    if isinstance(exc, StuckAtSaddle):
        return EXIT_SADDLE
    if isinstance(exc, NonFiniteState):
        return EXIT_NONFINITE
    return EXIT_FAIL


def _raw(config_path, overrides, seed=None) -> dict:
    raw = nominal_raw() if config_path is None else read_raw(config_path)
    raw = apply_overrides(raw, overrides)
    if seed is not None:
        raw["seed"] = int(seed)
    return raw


def _checked(raw):
    cfg = parse_config(raw)
    problems = cfg.problems()
    if problems:
        raise ConfigError("; ".join(problems))
    return cfg


def default_out(name: str) -> Path:
    return Path(os.environ.get(OUT_ENV, "uvmscoop-out")) / name


def cmd_validate(args) -> int:
    try:
        cfg = parse_config(_raw(args.config, args.set))
    except ConfigError as exc:
        print(f"invalid: {exc}")
        return EXIT_CONFIG
    problems = cfg.problems()
    if problems:
        print(f"invalid: {len(problems)} problem(s)")
        for p in problems:
            print(f"  - {p}")
        return EXIT_CONFIG
    print("valid")
    return EXIT_OK


def cmd_run(args) -> int:
    try:
        raw = _raw(args.config, args.set, args.seed)
        cfg = _checked(raw)
        out = Path(args.out) if args.out else default_out(cfg.name)
        log = run_scenario(cfg)
    except UvmsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exit_code(exc)
    rec = write_outputs(log, out)
    (out / "config.json").write_text(json.dumps(raw, indent=2) + "\n")
    print(f"wrote {out}  final_position_error={rec['final_position_error']:.4g} m")
    return EXIT_OK


def load_grid(text: str) -> dict:
    """Grid from a JSON file path or an inline JSON object ``{key: [values]}``."""
    p = Path(text)
    try:
        grid = json.loads(p.read_text() if p.is_file() else text)
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read grid {text!r}: {exc}") from exc
    if not isinstance(grid, dict) or not all(isinstance(v, list) for v in grid.values()):
        raise ConfigError("grid must be a JSON object mapping dotted keys to lists")
    return grid


def grid_cells(grid: dict) -> list[dict]:
    if not grid:
        return []
    keys = list(grid)
    return [dict(zip(keys, combo)) for combo in itertools.product(*(grid[k] for k in keys))]


def run_cell(raw: dict, cell: dict, outdir) -> dict:
    """One sweep cell; failures are recorded instead of raised."""
    row = {"status": "ok", "error": ""}
    try:
        cfg = _checked(apply_overrides(raw, [f"{k}={json.dumps(v)}" for k, v in cell.items()]))
        log = run_scenario(cfg)
        rec = metrics(log)
        if outdir is not None:
            write_outputs(log, outdir, rec)
        row.update({m: rec[m] for m in SUMMARY_METRICS})
    except UvmsError as exc:
        row.update(status=type(exc).__name__, error=str(exc))
    return row


def sweep(raw: dict, grid: dict, out, jobs: int = 1, keep_logs: bool = False) -> list[dict]:
    """Run every grid cell and write ``summary.csv``; returns the rows."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    cells = grid_cells(grid)
    dirs = [out / f"cell_{i:03d}" if keep_logs else None for i in range(len(cells))]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run_cell, [raw] * len(cells), cells, dirs))
    else:
        results = [run_cell(raw, c, d) for c, d in zip(cells, dirs)]
    header = ["cell", *grid, "status", "error", *SUMMARY_METRICS]
    rows = [{"cell": i, **{k: json.dumps(v) for k, v in c.items()}, **r}
            for i, (c, r) in enumerate(zip(cells, results))]
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=header)
        w.writeheader()
        w.writerows(rows)
    return rows


def cmd_sweep(args) -> int:
    try:
        raw = _raw(args.config, args.set, args.seed)
        _checked(raw)
        grid = load_grid(args.grid)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else default_out(raw.get("name", "scenario") + "-sweep")
    rows = sweep(raw, grid, out, args.jobs, args.keep_logs)
    failed = sum(r["status"] != "ok" for r in rows)
    print(f"wrote {out / 'summary.csv'}  cells={len(rows)} failed={failed}")
    return EXIT_OK


def cmd_verify(args) -> int:
    try:
        results = verify_mod.run_all(args.seed, args.fault, args.samples)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name:<26} {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uvmscoop", description=__doc__.splitlines()[0],
                                 epilog=__doc__.split("\n", 1)[1],
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="scenario JSON (default: shipped nominal scenario)")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="dotted-key override, value parsed as JSON; repeatable")

    p = sub.add_parser("validate", help="check a scenario and list every violation")
    common(p)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("run", help="simulate a scenario and write logs, metrics and plot data")
    common(p)
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV}/<name>)")
    p.add_argument("--seed", type=int, help="override the scenario seed")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("sweep", help="run a parameter grid and write summary.csv")
    common(p)
    p.add_argument("--grid", required=True, help="JSON file or inline JSON {key: [values]}")
    p.add_argument("--out", help=f"output directory (default: ${OUT_ENV}/<name>-sweep)")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    p.add_argument("--keep-logs", action="store_true", help="also write per-cell outputs")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("verify", help="run the built-in oracle suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples", type=int, default=200)
    p.add_argument("--fault", action="append", default=[], choices=verify_mod.FAULTS,
                   help="inject a known defect (to check the suites catch it)")
    p.set_defaults(func=cmd_verify)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
