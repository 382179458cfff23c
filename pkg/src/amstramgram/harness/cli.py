"""Command-line entry point: ``amstramgram {run,table,plot,selftest}``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import records as rec
from .config import ConfigError, load_config
from .runner import run_experiment, write_plots
from .selftest import run_selftest
from .table import collect_summaries, render_csv, render_text, summarize

logger = logging.getLogger("amstramgram")

EXIT_OK = 0
EXIT_FAILED_RUNS = 1
EXIT_CONFIG = 2


def _setup_logging(level: str) -> None:
    logging.basicConfig(level=getattr(logging, level), format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def cmd_run(args) -> int:
    try:
        config = load_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    _setup_logging("DEBUG" if args.verbose else config.log_level)
    summaries = run_experiment(config)
    rows = summarize(summaries)
    print(render_text(rows), end="")
    failed = [s for s in summaries if s.get("status") != "ok"]
    for s in failed:
        print(f"FAILED {s['problem']} seed {s['seed']}: {s.get('error')}", file=sys.stderr)
    return EXIT_FAILED_RUNS if failed else EXIT_OK


def cmd_table(args) -> int:
    _setup_logging("WARNING")
    summaries, missing = collect_summaries(args.dirs)
    for m in missing:
        print(f"skipped {m}: no summary found", file=sys.stderr)
    rows = summarize(summaries)
    print(render_text(rows), end="")
    if args.csv:
        Path(args.csv).write_text(render_csv(rows))
    return EXIT_OK


def cmd_plot(args) -> int:
    _setup_logging("INFO")
    target = Path(args.records)
    directory = target.parent if target.is_file() else target
    records_path = target if target.is_file() else directory / rec.RECORDS_FILE
    if not records_path.is_file():
        print(f"no records file at {records_path}", file=sys.stderr)
        return EXIT_CONFIG
    rows = rec.read_records(records_path)
    curves_path = directory / rec.RCE_FILE
    curves = rec.read_rce_curves(curves_path) if curves_path.is_file() else {}
    eps = args.eps
    if eps is None and (directory / rec.SUMMARY_FILE).is_file():
        eps = rec.read_summary(directory / rec.SUMMARY_FILE).get("eps")
    out = Path(args.out) if args.out else directory
    out.mkdir(parents=True, exist_ok=True)
    selectors = args.iteration if args.iteration else [0, -1]
    for path in write_plots(out, rows, curves, eps, selectors):
        print(path)
    return EXIT_OK


def cmd_selftest(args) -> int:
    results = run_selftest(args.seed)
    for r in results:
        print(f"{'PASS' if r.passed else 'FAIL'}  {r.name}: {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILED_RUNS


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="amstramgram", description="Natural-gradient PINN training with adaptive spectral cutoffs.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="train every (problem, seed) pair of a YAML config")
    p.add_argument("config", help="YAML experiment file")
    p.add_argument("-v", "--verbose", action="store_true")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("table", help="mean/std summary table over run directories")
    p.add_argument("dirs", nargs="*", help="run directories (searched recursively for summary.json)")
    p.add_argument("--csv", help="also write the table as CSV")
    p.set_defaults(func=cmd_table)

    p = sub.add_parser("plot", help="SVG plots from a run directory or records CSV")
    p.add_argument("records", help="run directory or records.csv")
    p.add_argument("-i", "--iteration", type=int, action="append", help="RCE snapshot index (negative counts from the end); repeatable")
    p.add_argument("--eps", type=float, help="precision line (default: from summary.json)")
    p.add_argument("-o", "--out", help="output directory (default: next to the records)")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("selftest", help="run the built-in invariant checks")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
