"""Command-line entry point.

Exit codes: 0 success, 1 selftest failure, 2 configuration error,
3 missing or stale artifact, 4 numerical failure in at least one cell.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from corrsched import experiment as ex
from corrsched.config import ConfigError, load_config
from corrsched.selftest import run_selftest

EXIT_OK, EXIT_SELFTEST, EXIT_CONFIG, EXIT_MISSING, EXIT_NUMERIC = 0, 1, 2, 3, 4


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--config", type=Path, default=None, help="INI experiment config (defaults if omitted)")
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for 'run' and 'pdm'")
    p.add_argument("--compact-traces", action="store_true", help="omit state sequences from written traces")
    p.add_argument("--write-traces", action="store_true", help="also write traces.jsonl")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="corrsched", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="verb", required=True)
    sub.add_parser("calibrate", parents=[common], help="calibrate threshold surfaces")
    sub.add_parser("run", parents=[common], help="run the paired experiment grid")
    sub.add_parser("report", parents=[common], help="write tables and plots from cell records")
    sub.add_parser("pdm", parents=[common], help="calibrate, run and report the pdm-lite grid")
    sub.add_parser("selftest", parents=[common], help="run built-in oracle checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    if args.verb == "selftest":
        return EXIT_OK if run_selftest() else EXIT_SELFTEST
    try:
        cfg = load_config(args.config)
        if args.compact_traces or args.write_traces:
            cfg = replace(cfg, compact_traces=cfg.compact_traces or args.compact_traces,
                          write_traces=cfg.write_traces or args.write_traces or args.compact_traces)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.verb == "calibrate":
            paths = ex.cmd_calibrate(cfg, args.out)
            print(f"wrote {len(paths)} threshold surfaces to {args.out / 'surfaces'}")
        elif args.verb == "run":
            res = ex.cmd_run(cfg, args.out, args.jobs)
            print(f"{res.n_cells} cells in {res.wall_time:.1f}s -> {args.out / 'cells.jsonl'}")
            return _report_failures(res)
        elif args.verb == "report":
            paths = ex.cmd_report(cfg, args.out)
            print("wrote " + ", ".join(p.name for p in paths))
        elif args.verb == "pdm":
            res = ex.cmd_pdm(cfg, args.out, args.jobs)
            print(f"{res.n_cells} pdm-lite cells -> {args.out / 'pdm'}")
            return _report_failures(res)
    except ex.MissingArtifactError as exc:
        print(f"missing artifact: {exc}", file=sys.stderr)
        return EXIT_MISSING
    except FloatingPointError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    return EXIT_OK


def _report_failures(res) -> int:
    if not res.failed:
        return EXIT_OK
    print(f"{len(res.failed)} cell(s) hit numerical failures:", file=sys.stderr)
    for domain, frac, seed in res.failed:
        print(f"  {domain} seed={seed} budget_fraction={frac:.2f}", file=sys.stderr)
    return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
