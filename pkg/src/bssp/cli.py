"""Command-line entry point.

Exit codes: 0 success, 1 configuration error, 2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from . import experiment
from .config import parse_config
from .errors import ConfigError, NumericError, ParameterError, UnsupportedError

COMMANDS = {
    "solve": "run both phases on every ray and write solutions, metrics and ground truth",
    "ground-truth": "write the ground-truth constrained front",
    "verify-gap": "compare lower bounds with ground-truth optima (gap.json)",
    "sweep-rays": "solve at several ray counts (sweep.csv)",
    "metrics": "recompute metrics from an existing solutions.csv",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError("<command line>", message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bssp", description="Constrained Pareto front solver.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", required=True, help="JSON file or inline JSON text")
        p.add_argument("--out", help="output directory (overrides the config)")
        p.add_argument("--seed", type=int, help="RNG seed (overrides the config)")
        p.add_argument("--threads", type=int, help="worker threads for the ray batch")
        p.add_argument("--trace", action="store_true", help="also write trace.jsonl")
        if name == "sweep-rays":
            p.add_argument("--ray-counts", type=int, nargs="+", help="ray counts, ascending")
        if name == "metrics":
            p.add_argument("--solutions", help="solutions.csv to read (default: OUT/solutions.csv)")
    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        cfg = parse_config(args.config).with_overrides(args.seed, args.threads, args.out,
                                                       args.trace)
        if args.command == "sweep-rays" and args.ray_counts:
            counts = args.ray_counts
            if counts != sorted(set(counts)) or counts[0] < 1:
                raise ConfigError("--ray-counts", "must be positive and strictly ascending")
            cfg.ray_counts = counts
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    try:
        if args.command == "solve":
            return experiment.run_experiment(cfg)
        if args.command == "ground-truth":
            return experiment.ground_truth_command(cfg)
        if args.command == "verify-gap":
            experiment.verify_gap_command(cfg)
        elif args.command == "sweep-rays":
            experiment.sweep_rays_command(cfg)
        elif args.command == "metrics":
            experiment.metrics_command(cfg, args.solutions)
        return 0
    except (NumericError, ParameterError, UnsupportedError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
