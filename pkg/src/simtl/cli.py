"""Command-line entry point: ``simtl run|sweep <config>`` and ``simtl verify prop1|prop2|tables``."""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace

from simtl.config import load_config
from simtl.errors import ConfigError
from simtl.experiment import EXIT_CONFIG, EXIT_OK, EXIT_VERIFY_FAILED, run_experiment
from simtl.verify import SUITES, check_tables


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="simtl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_ in (("run", "run one config over its seeds"), ("sweep", "run every cell of the config's sweep axes")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("config", help="TOML experiment config")
        p.add_argument("--out", help="output directory (overrides config 'out')")
        p.add_argument("--seed", type=int, help="run this single seed instead of the config's seeds")
        p.add_argument("--quiet", action="store_true")
    p = sub.add_parser("verify", help="run a numerical verification suite")
    p.add_argument("suite", choices=sorted(SUITES))
    p.add_argument("--fixture", help="published-table fixture (tables suite only)")
    p.add_argument("--quiet", action="store_true", help="only print failures")
    return parser


def _experiment(args) -> int:
    try:
        config = load_config(args.config)
    except FileNotFoundError:
        print(f"config error: no such file {args.config}", file=sys.stderr)
        return EXIT_CONFIG
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.seed is not None:
        if args.seed < 0:
            print("config error: --seed must be nonnegative", file=sys.stderr)
            return EXIT_CONFIG
        config = replace(config, seeds=(args.seed,))
    if args.command == "sweep" and not config.sweep:
        print("config error: sweep: at least one sweep axis (method, alpha, beta) is required", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "run" and config.sweep:
        print("config error: sweep: 'run' takes a config without sweep axes; use 'sweep'", file=sys.stderr)
        return EXIT_CONFIG
    return run_experiment(config, out=args.out, quiet=args.quiet)


def _verify(args) -> int:
    try:
        if args.suite == "tables":
            checks = check_tables(args.fixture)
        else:
            if args.fixture:
                print("config error: --fixture only applies to the tables suite", file=sys.stderr)
                return EXIT_CONFIG
            checks = SUITES[args.suite]()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for c in checks:
        if not (args.quiet and c.passed):
            print(c.line())
    failed = sum(not c.passed for c in checks)
    print(f"{args.suite}: {len(checks) - failed}/{len(checks)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VERIFY_FAILED


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.command == "verify":
        return _verify(args)
    return _experiment(args)


if __name__ == "__main__":
    sys.exit(main())
