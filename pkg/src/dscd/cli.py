"""Command line entry point: ``dscd optimize | bench | bilevel``."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import bilevel, harness
from .global_step import DEFAULT_WINDOW
from .hybrid import DEFAULT_T, HybridConfig, run_adam, run_baseline_uniform, run_dscd, run_hybrid
from .objective import OBJECTIVES, get_objective

METHODS = ("adam", "adam+dscd", "dscd", "uniform")


def _alternation_threshold(text: str) -> float:
    value = math.inf if text.lower() in ("inf", "infinity") else float(text)
    if not value >= 1:
        raise argparse.ArgumentTypeError("T must be >= 1 or 'inf'")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dscd", description="Hybrid local/global optimisation with DSCD.")
    sub = parser.add_subparsers(dest="command", required=True)

    opt = sub.add_parser("optimize", help="single run on a benchmark function; writes a trace CSV")
    opt.add_argument("--function", required=True, choices=sorted(OBJECTIVES))
    opt.add_argument("--dim", type=int, default=10)
    opt.add_argument("--budget", type=int, default=20_000, help="objective evaluations, including the first")
    opt.add_argument("--method", required=True, choices=METHODS)
    lr = opt.add_mutually_exclusive_group()
    lr.add_argument("--lr", type=float, default=None)
    lr.add_argument("--lr-schedule", default=None, metavar="linear:A:B")
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--k", type=int, default=DEFAULT_WINDOW, help="loss window length")
    opt.add_argument("--t", type=_alternation_threshold, default=DEFAULT_T, help="alternation threshold, or 'inf'")
    opt.add_argument("--initial-mode", choices=("local", "global"), default="local")
    opt.add_argument("--out", required=True)

    bench = sub.add_parser("bench", help="replicated study; writes aggregate.csv and summary.json")
    bench.add_argument("--config", required=True)
    bench.add_argument("--out", required=True)
    bench.add_argument("--workers", type=int, default=1)

    bl = sub.add_parser("bilevel", help="toy architecture search; writes trace.csv and checkpoints.json")
    bl.add_argument("--config", required=True)
    bl.add_argument("--out", required=True)
    return parser


def cmd_optimize(args) -> None:
    if args.budget < 1 or args.dim < 1 or args.k < 1:
        raise ValueError("budget, dim and k must be positive")
    spec = get_objective(args.function, args.dim, args.budget)
    rng = np.random.default_rng(args.seed)
    lr = args.lr_schedule if args.lr_schedule is not None else args.lr
    if lr is None and args.method in ("adam", "adam+dscd"):
        raise ValueError(f"--lr or --lr-schedule is required for {args.method}")
    if args.method == "adam":
        trace = run_adam(spec, args.budget, lr, rng, method="adam", seed=args.seed)
    elif args.method == "adam+dscd":
        cfg = HybridConfig(args.budget, lr=lr, T=args.t, K=args.k, initial_mode=args.initial_mode)
        trace = run_hybrid(spec, cfg, rng, method="adam+dscd", seed=args.seed)
    elif args.method == "dscd":
        trace = run_dscd(spec, args.budget, rng, K=args.k, seed=args.seed)
    else:
        trace = run_baseline_uniform(spec, args.budget, rng, seed=args.seed)
    harness.emit_trace_csv(trace, args.out)
    print(f"{args.method} on {args.function} (d={args.dim}): best {trace.final_best!r} after {len(trace)} evaluations")


def cmd_bench(args) -> None:
    config = harness.BenchConfig.load(args.config)
    result = harness.run_bench(config, args.out, workers=args.workers)
    for name in result.methods:
        med, lo, hi = result.final(name)
        print(f"{name}: median {med:.6g} [{lo:.6g}, {hi:.6g}]")


def cmd_bilevel(args) -> None:
    config = bilevel.SearchConfig.load(args.config)
    result = bilevel.run_search(config)
    harness.emit_trace_csv(result.trace, os.path.join(args.out, "trace.csv"))
    harness.write_json({"config": config.to_dict(), "checkpoints": result.checkpoints},
                       os.path.join(args.out, "checkpoints.json"))
    last = result.checkpoints[-1]
    print(f"step {last['step']}: group means {last['group_means']}, valid={last['valid_after_discretization']}")


COMMANDS = {"optimize": cmd_optimize, "bench": cmd_bench, "bilevel": cmd_bilevel}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        COMMANDS[args.command](args)
    except (ValueError, OSError, KeyError, TypeError, FloatingPointError, json.JSONDecodeError) as exc:
        reason = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"dscd {args.command}: error: {reason}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
