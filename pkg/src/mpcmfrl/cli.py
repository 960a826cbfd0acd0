"""Command-line interface.

Subcommands:
    train     --config FILE [--seed K] [--resume] [--stop-after-steps N]
    evaluate  --checkpoint DIR [--config FILE]
    ablate    --axis NAME --config FILE [--resume]
    plot-data --runs DIR --out CSV
"""

from __future__ import annotations

import argparse
import os
import sys

import numpy as np

from .config import load_config
from .errors import ConfigError, NumericError, StateError
from .harness import ABLATION_AXES, evaluate_checkpoint, run_ablation, run_experiment


def _find_run_config(checkpoint_dir: str) -> str:
    path = os.path.abspath(checkpoint_dir)
    for _ in range(4):
        path = os.path.dirname(path)
        candidate = os.path.join(path, "config.txt")
        if os.path.exists(candidate):
            return candidate
    raise ConfigError(
        f"no config.txt found above {checkpoint_dir}; pass --config explicitly")


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="mpcmfrl",
        description="Train and evaluate sampling-based MPC with a jointly "
                    "learned policy, value function, and dynamics model.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run an experiment config")
    p_train.add_argument("--config", required=True)
    p_train.add_argument("--seed", type=int, default=None, help="run a single seed")
    p_train.add_argument("--resume", action="store_true")
    p_train.add_argument("--stop-after-steps", type=int, default=None)
    p_train.add_argument("--quiet", action="store_true")

    p_eval = sub.add_parser("evaluate", help="offline-evaluate a saved checkpoint")
    p_eval.add_argument("--checkpoint", required=True)
    p_eval.add_argument("--config", default=None)

    p_ablate = sub.add_parser("ablate", help="run an ablation axis")
    p_ablate.add_argument("--axis", required=True, choices=ABLATION_AXES)
    p_ablate.add_argument("--config", required=True)
    p_ablate.add_argument("--resume", action="store_true")
    p_ablate.add_argument("--quiet", action="store_true")

    p_plot = sub.add_parser("plot-data", help="merge curves and render figures")
    p_plot.add_argument("--runs", required=True)
    p_plot.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "train":
            config = load_config(args.config)
            seeds = (args.seed,) if args.seed is not None else None
            result = run_experiment(config, seeds=seeds, resume=args.resume,
                                    stop_after_steps=args.stop_after_steps,
                                    quiet=args.quiet)
            print(f"wrote {result['evals']} and {result['curve']}")
        elif args.command == "evaluate":
            config_path = args.config or _find_run_config(args.checkpoint)
            config = load_config(config_path)
            record = evaluate_checkpoint(args.checkpoint, config)
            print(f"steps={record.steps} seed={record.seed}")
            for i, ret in enumerate(record.returns):
                print(f"episode {i}: return {ret:.4f}")
            print(f"mean return: {record.mean:.4f}")
        elif args.command == "ablate":
            config = load_config(args.config)
            result = run_ablation(config, args.axis, resume=args.resume, quiet=args.quiet)
            for label, paths in result["variants"].items():
                print(f"{label}: {paths['curve']}")
            if "heldout" in result:
                print(f"held-out error: {result['heldout']}")
        elif args.command == "plot-data":
            from .plots import plot_data_report

            result = plot_data_report(args.runs, args.out)
            print(f"wrote {result['csv']}")
            for fig in result["figures"]:
                print(f"rendered {fig}")
    except (ConfigError, NumericError, StateError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
