"""Command-line entry point: ``drivenwell <config> [--experiment X]
[--out PATH] [--threads N]``."""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, parse_config, with_overrides
from .experiments import run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drivenwell",
        description=(
            "Floquet spectra, tunneling dynamics and decoherence of a "
            "harmonically driven double well; results go to CSV."
        ),
    )
    parser.add_argument("config", help="path to a key = value configuration file")
    parser.add_argument("--experiment", default=None,
                        help="override the configured experiment")
    parser.add_argument("--out", default=None, help="override the output path")
    parser.add_argument("--threads", type=int, default=None,
                        help="override the worker count")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        print(f"error: cannot read config: {exc}", file=sys.stderr)
        return 2
    try:
        config = parse_config(text)
        config = with_overrides(config, experiment=args.experiment,
                                output=args.out, threads=args.threads)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
