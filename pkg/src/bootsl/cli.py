"""Command-line entry point.

Subcommands: simulate, estimate, mcmc, smc, exchange, replicate, experiment.
A run is described by a JSON config (or a preset picked with --experiment);
--seed, --out, and --scale override the resolved config, and every run
writes a manifest that reproduces it bitwise when passed back as --config.
"""

from __future__ import annotations

import argparse
import sys

from .config import PRESETS, apply_scale, validate_config
from .errors import BootslError, ConfigError
from .experiments import (
    run_estimate,
    run_exchange,
    run_experiment,
    run_mcmc,
    run_replicate,
    run_simulate,
    run_smc,
)
from .tableio import read_json

COMMANDS = {
    "simulate": lambda cfg, jobs: run_simulate(cfg),
    "estimate": lambda cfg, jobs: run_estimate(cfg),
    "mcmc": lambda cfg, jobs: run_mcmc(cfg),
    "smc": lambda cfg, jobs: run_smc(cfg),
    "exchange": lambda cfg, jobs: run_exchange(cfg),
    "replicate": run_replicate,
    "experiment": run_experiment,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bootsl",
        description="Simulation-based likelihood estimation experiments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, help=f"run the {name} step")
        p.add_argument("--config", help="JSON config or manifest path")
        p.add_argument(
            "--experiment",
            choices=sorted(PRESETS),
            help="preset to start from when no config is given",
        )
        p.add_argument("--seed", type=int, help="override the master seed")
        p.add_argument("--out", help="override the output directory")
        p.add_argument("--jobs", type=int, default=1, help="parallel replicate workers")
        p.add_argument(
            "--scale",
            type=float,
            default=1.0,
            help="uniformly scale sizes and iteration counts",
        )
    return parser


def _load_config(args):
    if args.config:
        raw = read_json(args.config)
    elif args.experiment:
        raw = {"experiment": args.experiment}
    else:
        raise ConfigError([("--config", "give a config file or pick --experiment")])
    cfg = validate_config(raw)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out"] = args.out
    if overrides:
        doc = cfg.as_dict()
        doc.update(overrides)
        cfg = validate_config(doc)
    if args.scale != 1.0:
        cfg = apply_scale(cfg, args.scale)
    return cfg


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except ConfigError as exc:
        for path, reason in exc.problems:
            print(f"config error at {path}: {reason}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        written = COMMANDS[args.command](cfg, args.jobs)
    except ConfigError as exc:
        for path, reason in exc.problems:
            print(f"config error at {path}: {reason}", file=sys.stderr)
        return 2
    except BootslError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    except (RuntimeError, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
