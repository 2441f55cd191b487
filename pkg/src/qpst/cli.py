"""Command-line entry points: run scenarios, suites, emit plot scripts."""

from __future__ import annotations

import argparse
import json
import sys

from .scenario import ConfigError, emit_plot_script, run_scenario, run_suite

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_CONFIG = 2
EXIT_IMPRECISE = 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="qpst",
        description="Dissipative-network state-transfer scenario runner",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one scenario config")
    p_run.add_argument("config", help="scenario TOML file")
    p_run.add_argument("--out", default=".", help="output directory")
    p_run.add_argument("--allow-imprecise", action="store_true",
                       help="do not fail on phase-budget overflow")
    p_run.add_argument("--threads", type=int, default=1,
                       help="accepted for symmetry with suite; run is serial")

    p_suite = sub.add_parser("suite", help="run every scenario in a directory")
    p_suite.add_argument("directory", help="directory of scenario TOML files")
    p_suite.add_argument("--out", default=".", help="output directory")
    p_suite.add_argument("--allow-imprecise", action="store_true")
    p_suite.add_argument("--threads", type=int, default=2,
                         help="concurrent scenarios")

    p_plot = sub.add_parser("plot", help="emit a plotting script for a curve CSV")
    p_plot.add_argument("csv", help="curve CSV written by run/suite")
    p_plot.add_argument("--out", default=None, help="script path")
    p_plot.add_argument("--log-x", action="store_true",
                        help="logarithmic tau axis")

    args = parser.parse_args(argv)

    try:
        if args.command == "run":
            summary = run_scenario(args.config, args.out,
                                   allow_imprecise=args.allow_imprecise)
            print(json.dumps(summary, indent=2, default=str))
            if summary["status"] == "imprecise":
                print("error: tau grid exceeds the phase-precision budget "
                      "(rerun with --allow-imprecise to accept)",
                      file=sys.stderr)
                return EXIT_IMPRECISE
            return EXIT_OK if summary["status"] == "pass" else EXIT_FAIL
        if args.command == "suite":
            aggregate = run_suite(args.directory, args.out,
                                  allow_imprecise=args.allow_imprecise,
                                  threads=args.threads)
            print(json.dumps(aggregate, indent=2, default=str))
            return EXIT_OK if aggregate["passed"] == aggregate["total"] else EXIT_FAIL
        if args.command == "plot":
            path = emit_plot_script(args.csv, args.out, log_x=args.log_x)
            print(path)
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
