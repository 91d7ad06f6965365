"""Command line: ``hees run|validate|version``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import __version__
from .harness import ParseError, ValidationError, emit_csv, format_csv, median_trace, parse_config, run_experiment

log = logging.getLogger("hees")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2


def _load(path: str):
    return parse_config(Path(path).read_text(encoding="utf-8"))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hees", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config and write its trace CSV")
    p_run.add_argument("config")
    p_run.add_argument("--out", help="CSV path (default: config 'output', else stdout)")
    p_run.add_argument("--parallel", type=int, default=1, metavar="N")
    p_run.add_argument("--aggregate", choices=["median"])
    p_val = sub.add_parser("validate", help="check a config file")
    p_val.add_argument("config")
    sub.add_parser("version")
    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "version":
        print(__version__)
        return EXIT_OK
    try:
        cfg = _load(args.config)
    except (OSError, ParseError, ValidationError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"ok: {cfg.algorithm} on {cfg.problem} d={cfg.d}, {len(cfg.seeds)} seed(s), budget {cfg.budget}")
        return EXIT_OK

    traces = run_experiment(cfg, parallel=args.parallel)
    failed = [tr for tr in traces if tr.error]
    for tr in failed:
        log.error("seed %s stopped after %d iterations: %s", tr.seed, len(tr), tr.error)
    out_traces = [median_trace(traces)] if args.aggregate == "median" else traces
    out = args.out or cfg.output
    try:
        if out:
            emit_csv(out_traces, out)
        else:
            sys.stdout.write(format_csv(out_traces))
    except OSError as exc:
        print(f"cannot write output: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_RUNTIME if failed else EXIT_OK
