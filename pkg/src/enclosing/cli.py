"""``sim`` command-line front end.

Exit codes: 0 success, 1 validation failure, 2 runtime/numeric failure, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .analysis import PE_COLUMNS, pe_rows_from_tables
from .config import ScenarioConfig, parse_scenario, validate_scenario
from .core import ScenarioError, SimulationError
from .engine import run
from .logio import LogFormatError, LogTables, write_log
from .plots import PLOTS, emit_plots

EXIT_OK, EXIT_VALIDATION, EXIT_RUNTIME, EXIT_IO = 0, 1, 2, 3

log = logging.getLogger("enclosing")


def _parse_seeds(text: str) -> list[int]:
    lo, sep, hi = text.partition("..")
    try:
        a = int(lo)
        b = int(hi) if sep else a
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'a..b' or a single seed, got {text!r}") from None
    if b < a:
        raise argparse.ArgumentTypeError("seed range is empty")
    return list(range(a, b + 1))


def _run_one(cfg: ScenarioConfig, out_dir: Path, plots: bool) -> list[str]:
    result = run(cfg)
    files = write_log(result, out_dir)
    if plots:
        files += emit_plots(result, out_dir)
    if result.clamp_events:
        log.warning("%s: velocity limit clamped %d time(s)", out_dir, result.clamp_events)
    return [str(f) for f in files]


def cmd_run(args) -> int:
    cfg = parse_scenario(args.scenario)
    report = validate_scenario(cfg)
    if not report.ok:
        print("\n".join(report.lines()), file=sys.stderr)
        return EXIT_VALIDATION
    out = Path(args.out)
    if args.seeds is None:
        for f in _run_one(cfg, out, args.plots):
            print(f)
        return EXIT_OK
    jobs = [(replace(cfg, seed=s), out / f"seed_{s}") for s in args.seeds]
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        futures = [pool.submit(_run_one, c, d, args.plots) for c, d in jobs]
        for fut in futures:
            for f in fut.result():
                print(f)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = parse_scenario(args.scenario)
    report = validate_scenario(cfg)
    print("\n".join(report.lines()))
    return EXIT_OK if report.ok else EXIT_VALIDATION


def cmd_check_pe(args) -> int:
    tab = LogTables.read(args.log)
    rows = pe_rows_from_tables(tab, args.T, args.omega, start=args.start, stride=args.stride,
                               rho=args.rho, omega_cap=args.Omega, u_bar=args.u_bar)
    sink = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(sink, lineterminator="\n")
        w.writerow(PE_COLUMNS)
        for edge, l, N, lo, hi, a2, ok in rows:
            w.writerow([edge, l, N, repr(lo), repr(hi), repr(a2), int(ok)])
    finally:
        if sink is not sys.stdout:
            sink.close()
    failed = sum(1 for r in rows if not r[-1])
    if not rows:
        log.warning("no complete excitation window in the log")
        return EXIT_VALIDATION
    if failed:
        log.warning("%d of %d windows fail the excitation check", failed, len(rows))
        return EXIT_VALIDATION
    return EXIT_OK


def cmd_plot(args) -> int:
    tab = LogTables.read(args.log)
    for f in emit_plots(tab, args.out, args.which or None):
        print(f)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sim", description="Moving-target enclosing simulator")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate a scenario and write CSV logs")
    p.add_argument("scenario")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seeds", type=_parse_seeds, default=None, help="seed sweep 'a..b' (one subdirectory each)")
    p.add_argument("--jobs", type=int, default=None, help="worker processes for --seeds")
    p.add_argument("--plots", action="store_true", help="also write the SVG figures")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("validate", help="check a scenario against the standing assumptions")
    p.add_argument("scenario")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("check-pe", help="windowed persistent-excitation report from a run log")
    p.add_argument("log", help="run directory or a CSV inside it")
    p.add_argument("--T", type=float, required=True)
    p.add_argument("--omega", type=float, required=True)
    p.add_argument("--out", default=None, help="CSV destination (default stdout)")
    p.add_argument("--start", type=int, default=None, help="first window (default: detected equilibrium)")
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--rho", type=float, default=None, help="radius for the upper bound (default: log header)")
    p.add_argument("--Omega", type=float, default=None)
    p.add_argument("--u-bar", dest="u_bar", type=float, default=None)
    p.set_defaults(func=cmd_check_pe)

    p = sub.add_parser("plot", help="render SVG figures from a run log")
    p.add_argument("log", help="run directory or a CSV inside it")
    p.add_argument("--out", required=True)
    p.add_argument("--which", action="append", choices=PLOTS, help="repeatable; default all")
    p.set_defaults(func=cmd_plot)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("ENCLOSING_LOG_LEVEL", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (SimulationError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, LogFormatError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
