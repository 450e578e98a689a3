"""Command line: ``rrsim run <config.json> | presets | selftest``."""

from __future__ import annotations

import argparse
import sys

from rrsim.config import load_config
from rrsim.errors import RRSimError
from rrsim.experiments import run_experiment
from rrsim.selftest import run_selftest
from rrsim.systems import PRESETS, describe_preset

EXIT_CONFIG = 2


def list_presets() -> list[str]:
    lines = []
    for name in PRESETS:
        lines.extend(describe_preset(name))
        lines.append("")
    return lines


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rrsim", description="Round-robin sparsified feedback experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("config", help="path to the experiment config")
    sub.add_parser("presets", help="list built-in system presets and their parameters")
    sub.add_parser("selftest", help="run the built-in invariant checks")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "presets":
        print("\n".join(list_presets()).rstrip())
        return 0
    if args.command == "selftest":
        return 0 if run_selftest() else 1
    try:
        cfg = load_config(args.config)
        result = run_experiment(cfg)
    except (RRSimError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    print(f"{result.experiment}: {result.status}")
    for path in result.artifacts:
        print(f"  wrote {path}")
    return result.exit_code


if __name__ == "__main__":
    sys.exit(main())
