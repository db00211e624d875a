"""
Benchmark CLI for the lifted Langevin samplers.

    python -m src.bench.main run --config configs/rejection_q1_vs_q2.json \
        [--output results.csv] [--threads N] [--override key=value ...]

Exit codes: 0 success, 2 configuration error, 3 chain aborted.
"""
from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from src.bench import config as bench_config
from src.bench.experiments import run_experiment
from src.common.exceptions import ChainAbortedError, ConfigurationError
from src.common.logging_config import get_logger

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_CHAIN = 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(description="Run MALA / GMALA / GHMALA benchmark experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("--config", dest="config_path", required=True)
    run.add_argument("--output", dest="output_path", default=None)
    run.add_argument("--threads", type=int, default=None)
    run.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    return parser


def run(
    config_path: str,
    output_path: Optional[str] = None,
    threads: Optional[int] = None,
    overrides: Sequence[str] = (),
) -> int:
    try:
        cfg = bench_config.load_config(config_path, overrides)
        n_threads = bench_config.BENCH_THREADS if threads is None else threads
        if n_threads < 1:
            raise ConfigurationError(f"--threads must be >= 1, got {n_threads}")
    except ConfigurationError as exc:
        for message in exc.errors:
            print(f"config error: {message}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        run_experiment(cfg, threads=n_threads, output_path=output_path, dry_run=bench_config.DRY_RUN)
    except ChainAbortedError as exc:
        print(exc.describe(), file=sys.stderr)
        logger.error("Experiment %s aborted", cfg.experiment)
        return EXIT_CHAIN
    return EXIT_OK


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    return run(args.config_path, args.output_path, args.threads, args.override)


if __name__ == "__main__":
    sys.exit(main())
