"""Command-line entry point for reproducible experiment runs."""

from __future__ import annotations

import argparse
import sys

from . import pipeline
from .config import SCHEMA, load_config
from .errors import ToolkitError

COMMANDS = (
    "build-stats",
    "train-lm",
    "train-surrogate",
    "rank",
    "select-targets",
    "attack",
    "evaluate",
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankattack",
        description="Adversarial ranking attack toolkit: build models, run attacks, evaluate.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for command in COMMANDS:
        cmd = sub.add_parser(command, help=f"run the {command} step")
        cmd.add_argument("--config", default=None, help="experiment config file (INI-style sections)")
        for key, (section, typ, default, help_text) in SCHEMA.items():
            cmd.add_argument(
                f"--{key}",
                dest=key,
                default=None,
                metavar=typ.__name__.upper(),
                help=f"[{section}] {help_text} (default: {default!r})",
            )
        if command == "rank":
            cmd.add_argument(
                "--ranker",
                choices=("bm25", "victim", "surrogate"),
                default="victim",
                help="which ranking to produce (default: victim)",
            )
        if command == "evaluate":
            cmd.add_argument(
                "--include-timing",
                action="store_true",
                help="copy the measured wall clock from the timing sidecar into the report",
            )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {key: getattr(args, key) for key in SCHEMA if getattr(args, key, None) is not None}
    try:
        cfg = load_config(args.config, overrides)
        print(f"resolved config: {cfg.resolved()}", file=sys.stderr)
        if args.command == "build-stats":
            out = pipeline.cmd_build_stats(cfg)
        elif args.command == "train-lm":
            out = pipeline.cmd_train_lm(cfg)
        elif args.command == "rank":
            out = pipeline.cmd_rank(cfg, args.ranker)
        elif args.command == "train-surrogate":
            out = pipeline.cmd_train_surrogate(cfg)
        elif args.command == "select-targets":
            out = pipeline.cmd_select_targets(cfg)
        elif args.command == "attack":
            out = pipeline.cmd_attack(cfg)
        else:
            out = pipeline.cmd_evaluate(cfg, include_timing=args.include_timing)
    except ToolkitError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    print(out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
