"""Command-line entry point.

    bulkadiabatic model validate CONFIG
    bulkadiabatic run EXPERIMENT CONFIG [--out DIR] [--threads N] [--seed S]

Exit codes: 0 pass, 1 a threshold failed, 2 invalid input.
"""

from __future__ import annotations

import argparse
import json
import sys

from .config import ConfigError, Scenario
from .experiments import EXPERIMENTS, _jsonable, validate_model
from .lattice import DomainError
from .liouvillian import GapError, WeightConstructionError

EXIT_PASS, EXIT_FAIL, EXIT_INVALID = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bulkadiabatic", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    model = sub.add_parser("model", help="model checks")
    msub = model.add_subparsers(dest="action", required=True)
    val = msub.add_parser("validate", help="assemble and check a model configuration")
    val.add_argument("config_path", nargs="?")
    val.add_argument("--config", dest="config_flag")

    run = sub.add_parser("run", help="run an experiment")
    run.add_argument("experiment", choices=sorted(EXPERIMENTS))
    run.add_argument("config_path", nargs="?")
    run.add_argument("--config", dest="config_flag")
    run.add_argument("--out", default="results")
    run.add_argument("--threads", type=int, default=1)
    run.add_argument("--seed", type=int, default=None)
    return p


def _load(args) -> Scenario:
    path = args.config_flag or args.config_path
    if not path:
        raise ConfigError("config", "no configuration given")
    sc = Scenario.load(path)
    if getattr(args, "seed", None) is not None:
        sc = sc.with_seed(args.seed)
    return sc


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        sc = _load(args)
        if args.command == "model":
            report = validate_model(sc)
            print(json.dumps(_jsonable(report), indent=2, sort_keys=True))
            return EXIT_PASS if report["passed"] else EXIT_FAIL
        if args.threads < 1:
            raise ConfigError("--threads", "must be at least 1")
        rep = EXPERIMENTS[args.experiment](sc, threads=args.threads)
    except (ConfigError, GapError, DomainError, WeightConstructionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    csv_path, json_path = rep.write(args.out)
    for name, ok in rep.checks.items():
        print(f"{name}: {'PASS' if ok else 'FAIL'}")
    if rep.leakage is not None:
        print(f"weight leakage: {rep.leakage:.3e}")
    print(f"wrote {csv_path} and {json_path}")
    return EXIT_PASS if rep.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
