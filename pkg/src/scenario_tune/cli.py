"""Command-line entry point ``scenario-tune``.

Exit codes: 0 success, 2 configuration, 3 simulation, 4 lineage mismatch,
5 missing artifacts.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

from . import pipeline
from .config import ConfigError, load_config
from .sim import SimulationDiverged
from .spaces import DomainError

EXIT_OK, EXIT_CONFIG, EXIT_SIM, EXIT_LINEAGE, EXIT_MISSING = 0, 2, 3, 4, 5
THREADS_ENV = "SCENARIO_TUNE_THREADS"
COMMANDS = ("tune", "evaluate", "certify", "validate", "simulate", "report")


def _u64(s: str) -> int:
    v = int(s)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _threads(arg) -> int:
    raw = arg if arg is not None else os.environ.get(THREADS_ENV)
    if raw in (None, ""):
        return 1
    if str(raw).lower() == "max":
        return os.cpu_count() or 1
    n = int(raw)
    if n < 1:
        raise ConfigError("thread count must be >= 1")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="scenario-tune", description="Scenario-certified controller tuning.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", required=True, help="run configuration (JSON)")
    p.add_argument("--out", help="output directory (overrides config out_dir)")
    p.add_argument("--seed", type=_u64, help="master seed (overrides config master_seed)")
    p.add_argument("--threads", help=f"worker processes, an integer or 'max' (fallback: ${THREADS_ENV})")
    p.add_argument("--n-val", type=int, help="validate: number of fresh scenarios (overrides config)")
    p.add_argument("--theta", help="simulate: JSON list with the tuning parameter")
    p.add_argument("--scenario", default="nominal", help="simulate: 'nominal' or a certification scenario index")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, seed=args.seed, out_dir=args.out)
        threads = _threads(args.threads)
        if args.command == "tune":
            pipeline.cmd_tune(cfg, threads=threads)
        elif args.command == "evaluate":
            pipeline.cmd_evaluate(cfg, threads=threads)
        elif args.command == "certify":
            pipeline.cmd_certify(cfg)
        elif args.command == "validate":
            if args.n_val is not None and args.n_val < 1:
                raise ConfigError("N_val must be >= 1")
            pipeline.cmd_validate(cfg, n_val=args.n_val)
        elif args.command == "simulate":
            theta = json.loads(args.theta) if args.theta else None
            if args.scenario != "nominal" and not args.scenario.isdigit():
                raise ConfigError("--scenario must be 'nominal' or a non-negative index")
            pipeline.cmd_simulate(cfg, theta=theta, scenario=args.scenario)
        else:
            pipeline.cmd_report(cfg)
    except (ConfigError, DomainError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SimulationDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SIM
    except pipeline.LineageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_LINEAGE
    except pipeline.MissingArtifact as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_MISSING
    return EXIT_OK


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
