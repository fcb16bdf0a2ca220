"""Command-line experiment driver."""

from __future__ import annotations

import argparse
import sys

from .harness import ALGOS, RunConfig, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="treebandit",
        description="Run online learners on compiled poker trees.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one algorithm over a batch of seeds")
    p.add_argument("--game", required=True, choices=("kuhn3", "kuhn5", "leduc"))
    p.add_argument("--role", default="x", choices=("x", "o"))
    p.add_argument("--algo", required=True, choices=ALGOS)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--bound", default="practical", choices=("theory", "practical"))
    p.add_argument("--c", type=float, default=0.1,
                   help="practical-bound constant")
    p.add_argument("--opponent", default="nash:alpha=0.3333333333333333",
                   help="uniform | nash:alpha=F | file:PATH")
    p.add_argument("--seeds", type=int, default=None,
                   help="run seeds 0..N-1")
    p.add_argument("--seed-list", default=None,
                   help="comma-separated explicit seeds")
    p.add_argument("--budget", type=int, default=1_000_000,
                   help="episode cap (PAC) or horizon T (ucb-t)")
    p.add_argument("--stride", type=int, default=1000,
                   help="episodes between progress rows")
    p.add_argument("--out", required=True, help="output directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.seed_list is not None:
        seeds = tuple(int(s) for s in args.seed_list.split(","))
    elif args.seeds is not None:
        seeds = tuple(range(args.seeds))
    else:
        seeds = (0,)
    config = RunConfig(
        game=args.game,
        role=args.role,
        algo=args.algo,
        epsilon=args.epsilon,
        delta=args.delta,
        bound=args.bound,
        c=args.c,
        opponent=args.opponent,
        seeds=seeds,
        budget=args.budget,
        stride=args.stride,
        out_dir=args.out,
    )
    result = run(config)
    print(
        f"{config.algo} on {config.game}/{config.role}: "
        f"episodes {result.mean_episodes:.1f} +/- {result.se_episodes:.1f} "
        f"(one standard error, {len(seeds)} seeds)"
    )
    if result.mistake_rate is not None:
        print(f"mistake rate {result.mistake_rate:.3f}")
    print(f"wrote {result.progress_path} and {result.summary_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
