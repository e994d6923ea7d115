"""Command-line entry point ``mblab``.

Exit codes: 0 success, 2 invalid input (arguments or config), 3 runtime
failure.
"""
from __future__ import annotations

import argparse
import sys

from . import experiments
from .config import MODES, load_config, validate
from .errors import ConfigError, MblabError

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="mblab",
        description="Exponential families of Markov chains, concentration bounds "
        "and Track-and-Stop best-arm identification.",
    )
    p.add_argument("mode", choices=MODES)
    p.add_argument("--config", required=True, metavar="PATH", help="YAML experiment file")
    p.add_argument("--seed", type=int, help="override the master seed")
    p.add_argument("--reps", type=int, help="override the replication count")
    p.add_argument("--out", default="out", metavar="DIR", help="output directory (default: out)")
    p.add_argument("--trace", action="store_true", help="write per-step traces (run mode)")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if cfg.mode != args.mode:
            print(f"mblab: config mode is {cfg.mode!r}, command asked for {args.mode!r}; "
                  f"running {args.mode!r}", file=sys.stderr)
            cfg.mode = args.mode
        if args.seed is not None:
            if args.seed < 0:
                print("mblab: --seed must be >= 0", file=sys.stderr)
                return EXIT_INVALID
            cfg.seed = args.seed
        if args.reps is not None:
            if args.reps < 1:
                print("mblab: --reps must be >= 1", file=sys.stderr)
                return EXIT_INVALID
            cfg.replications = args.reps
        cfg = validate(cfg.to_dict())
    except (ConfigError, ValueError) as exc:
        print(f"mblab: invalid config: {exc}", file=sys.stderr)
        return EXIT_INVALID
    try:
        out = experiments.run_mode(cfg, args.out, trace=args.trace)
    except (MblabError, ArithmeticError, RuntimeError, OSError) as exc:
        print(f"mblab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"mblab: wrote {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
