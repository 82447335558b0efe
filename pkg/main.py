"""Command-line entry point for Skewalk."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from controllers.app import run
from disk.export import emit_plotdata
from disk.storage import IO, dict_to_config
from models.errors import ConfigInvalid, SkewalkError
from models.params import Formats, RunConfig, Task_Name
from verify.report import VerificationReport

MIN_PYTHON: tuple[int, int] = (3, 13)
THREADS_ENV: str = "SKEWALK_THREADS"

logger = logging.getLogger("skewalk")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="skewalk", description="Exact and Monte Carlo checks for random walks perturbed at zero."
    )
    parser.add_argument("--config", type=Path, required=True, help="run configuration (JSON)")
    parser.add_argument("--seed", type=int, help="root seed, overrides the config")
    parser.add_argument("--threads", type=int, help=f"worker processes (fallback: ${THREADS_ENV})")
    parser.add_argument("--out", type=Path, help="output directory")
    parser.add_argument("--task", nargs="+", choices=[task.value for task in Task_Name], help="tasks to run")
    parser.add_argument("--convention", help="auto or fixed:on_negative|on_nonpositive[:shift]")
    parser.add_argument(
        "--charts", nargs="+", choices=[fmt.value for fmt in Formats], help="chart formats written by verify"
    )
    parser.add_argument(
        "--plotdata", metavar="CURVE", help="write plot data for CURVE (or 'all') from an existing verify.json"
    )
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="count", default=0)
    verbosity.add_argument("-q", "--quiet", action="store_true")
    return parser


def threads_from_env() -> int | None:
    raw = os.getenv(THREADS_ENV, "").strip()
    if not raw:
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigInvalid(f"{THREADS_ENV} must be an integer, got {raw!r}") from None


def apply_overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    """Layer command-line flags over the file config and re-validate the result."""
    overrides: dict[str, Any] = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    threads = args.threads if args.threads is not None else threads_from_env()
    if threads is not None:
        overrides["threads"] = threads
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.task:
        overrides["tasks"] = args.task
    if args.convention is not None:
        overrides["convention"] = args.convention
    if args.charts:
        overrides["charts"] = args.charts
    if not overrides:
        return config
    return dict_to_config({**config.model_dump(), **overrides})


def configure_logging(verbose: int, quiet: bool) -> None:
    level = logging.WARNING if quiet else logging.DEBUG if verbose > 1 else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)-7s %(name)s: %(message)s")


def main(argv: Sequence[str] | None = None) -> int:
    """Run Skewalk and return the process exit code."""
    if sys.version_info < MIN_PYTHON:
        raise RuntimeError("Skewalk requires Python 3.13+")
    args = build_parser().parse_args(argv)
    configure_logging(args.verbose, args.quiet)
    try:
        config = apply_overrides(IO.load_config(args.config), args)
        if args.plotdata:
            report = IO.load_json(config.out_dir / "verify.json", VerificationReport)
            for path in emit_plotdata(report, args.plotdata, config.out_dir / "plots"):
                print(path)
            return 0
        manifest = run(config)
    except SkewalkError as xcp:
        logger.error("%s: %s", type(xcp).__name__, xcp)
        return xcp.exit_code
    except OSError as xcp:
        logger.error("I/O failure: %s", xcp)
        return 4
    print(f"verdict: {manifest.verdict.value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
