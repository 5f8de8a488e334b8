"""Command-line entry point ``ctrlmix``.

Exit codes: 0 pass, 1 assertion failure or inconclusive result, 2 configuration
error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from pydantic import ValidationError

from ..errors import (ConfigurationError, ConvergenceError, FluxViolationError, InfeasibleError,
                      NumericalBlowupError, PathologicalDensityError, ResolutionError, SingularMapError)
from .commands import cmd_mix_rate, cmd_simulate, cmd_toy_oracle, cmd_verify
from .config import ExperimentConfig, load_config
from .suites import SUITES

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3
NUMERICAL_ERRORS = (NumericalBlowupError, ConvergenceError, ResolutionError, SingularMapError,
                    PathologicalDensityError, FluxViolationError, InfeasibleError, FloatingPointError)

__all__ = ["main", "build_parser", "ExperimentConfig", "load_config"]


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="JSON experiment config")
    common.add_argument("--seed", type=_u64, default=None, help="override the config seed")
    common.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    common.add_argument("--jobs", type=int, default=1, help="worker processes for ensembles")
    p = argparse.ArgumentParser(prog="ctrlmix", description="Coupling-based mixing experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("simulate", parents=[common], help="dump one trajectory")
    sub.add_parser("mix-rate", parents=[common], help="estimate the mixing rate")
    v = sub.add_parser("verify", parents=[common], help="run an invariant suite")
    v.add_argument("suite", choices=sorted(SUITES))
    sub.add_parser("toy-oracle", parents=[common], help="cross-check toy systems against oracles")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        cfg = load_config(args.config, args.seed)
    except (ValidationError, ConfigurationError, json.JSONDecodeError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "simulate":
            code = cmd_simulate(cfg, args.out, args.jobs)
        elif args.command == "mix-rate":
            code = cmd_mix_rate(cfg, args.out, args.jobs)
        elif args.command == "verify":
            code = cmd_verify(cfg, args.suite, args.out, args.jobs)
        else:
            code = cmd_toy_oracle(cfg, args.out, args.jobs)
    except ConfigurationError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERICAL_ERRORS as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AssertionError as exc:
        print(f"assertion failure: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"{args.command}: {'pass' if code == EXIT_PASS else 'fail'} ({args.out})")
    return code


if __name__ == "__main__":
    sys.exit(main())
