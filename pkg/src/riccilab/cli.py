"""Command-line entry point: batch experiments driven by TOML configs.

Subcommands map onto experiment kinds; each takes --config, --out and
--strict.  Exit codes: 0 success, 2 monitor violation, 3 numerical
failure, 4 config error.
"""

import argparse
import sys

from .config import load_config
from .errors import ParseError, RicciLabError, ValidationError
from .experiments import CONFIG_ERROR, NUMERICAL_FAILURE, run_experiment

_SUBCOMMANDS = {
    "flow": ("flow", "local-flow"),
    "cover": ("cover",),
    "exhaust": ("exhaustion",),
    "sweep": ("sweep",),
    "oracle": ("oracle-check",),
    "transfer": ("transfer-rate",),
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="riccilab",
        description="Numerical laboratory for Ricci flow and the local "
                    "Ricci flow on symmetry-reduced geometries")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, kinds in _SUBCOMMANDS.items():
        p = sub.add_parser(name, help=f"run a config of kind {' or '.join(kinds)}")
        p.add_argument("--config", required=True, help="TOML config path")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--strict", action="store_true",
                       help="treat unknown config keys as errors")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, strict=args.strict)
    except (ParseError, ValidationError, OSError) as err:
        print(f"config error: {err}", file=sys.stderr)
        return CONFIG_ERROR
    allowed = _SUBCOMMANDS[args.command]
    if cfg.kind not in allowed:
        print(f"config error: kind {cfg.kind!r} not valid for "
              f"'{args.command}' (expected {' or '.join(allowed)})",
              file=sys.stderr)
        return CONFIG_ERROR
    try:
        bundle = run_experiment(cfg, out_dir=args.out)
    except ValidationError as err:
        print(f"config error: {err}", file=sys.stderr)
        return CONFIG_ERROR
    except RicciLabError as err:
        print(f"numerical failure: {err}", file=sys.stderr)
        return NUMERICAL_FAILURE
    for line in bundle.errors:
        print(f"warning: {line}", file=sys.stderr)
    return bundle.status


if __name__ == "__main__":
    sys.exit(main())
