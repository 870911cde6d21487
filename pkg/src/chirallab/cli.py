"""Command line entry point: ``lab <experiment> --config FILE [--seed S] [--threads T] [--out DIR]``.

Exit status 0 on success, 2 for configuration errors, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from .config import EXPERIMENTS, load_config
from .exceptions import ConfigInvalid, NumericalFailure
from .records import _jsonable
from .runner import run

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="lab", description="Run a chiral strip experiment.")
    ap.add_argument("experiment", help=f"one of: {', '.join(EXPERIMENTS)}")
    ap.add_argument("--config", required=True, help="INI experiment file")
    ap.add_argument("--seed", type=int, help="override the model seed")
    ap.add_argument("--threads", help="worker threads (integer or 'auto'); falls back to LAB_THREADS")
    ap.add_argument("--out", help="output directory (overrides the config)")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.experiment not in EXPERIMENTS:
            raise ConfigInvalid(f"unknown experiment {args.experiment!r}")
        cfg = load_config(args.config)
        if cfg.experiment != args.experiment:
            raise ConfigInvalid(f"config is for {cfg.experiment!r}, not {args.experiment!r}")
        threads = args.threads if args.threads is not None else os.environ.get("LAB_THREADS")
        if args.seed is not None and args.seed < 0:
            raise ConfigInvalid("seed must be >= 0")
        cfg = cfg.with_overrides(seed=args.seed, threads=threads, output_dir=args.out)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        result = run(cfg)
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    for w in result.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(json.dumps({"experiment": result.experiment, "config_hash": result.config_hash,
                      "wall_time": round(result.wall_time, 3), "summary": _jsonable(result.summary),
                      "files": result.files}, indent=2))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
