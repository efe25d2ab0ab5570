"""Command-line entry point for the benchmark experiments."""

import argparse
import json
import logging
import sys
from pathlib import Path

from ._validation import ParameterError
from .experiments import (
    ALGORITHMS,
    ExperimentConfig,
    default_config,
    run_sweep,
    write_csv,
    write_plot_data,
)

logger = logging.getLogger("robust_gfi")


def _u64(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed {text!r}") from None
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid count {text!r}") from None
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _algorithms(text):
    algs = tuple(a.strip().upper() for a in text.split(",") if a.strip())
    bad = [a for a in algs if a not in ALGORITHMS]
    if bad or not algs:
        raise argparse.ArgumentTypeError(
            f"unknown algorithm(s) {', '.join(bad) or '(none)'}; choose from {','.join(ALGORITHMS)}"
        )
    return algs


def build_parser():
    parser = argparse.ArgumentParser(
        prog="robust-gfi",
        description="Run the robust graph-filter identification benchmarks and write a CSV.",
    )
    parser.add_argument("--test-case", type=int, choices=(1, 2, 3),
                        help="benchmark scenario (may also come from the config file)")
    parser.add_argument("--config", type=Path, help="JSON experiment configuration")
    parser.add_argument("--seed", type=_u64, help="master seed (default 0)")
    parser.add_argument("--trials", type=_positive_int, help="trials per sweep point (default 100)")
    parser.add_argument("--out", type=Path, help="output CSV path (default tc<N>.csv)")
    parser.add_argument("--algorithms", type=_algorithms,
                        help=f"comma-separated subset of {','.join(ALGORITHMS)}")
    parser.add_argument("--plot-data", type=Path, metavar="DIR",
                        help="also write one two-column file per algorithm curve")
    parser.add_argument("--jobs", type=_positive_int, default=1, help="worker processes")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    return parser


def load_config(args):
    data = {}
    if args.config is not None:
        try:
            data = json.loads(args.config.read_text())
        except OSError as exc:
            raise ParameterError(f"cannot read config {args.config}: {exc.strerror}") from exc
        except json.JSONDecodeError as exc:
            raise ParameterError(f"config {args.config} is not valid JSON: {exc}") from exc
        if not isinstance(data, dict):
            raise ParameterError(f"config {args.config} must hold a JSON object")
    if args.test_case is not None:
        data["test_case"] = f"tc{args.test_case}"
    if "test_case" not in data:
        raise ParameterError("--test-case is required when the config does not set test_case")
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.trials is not None:
        overrides["n_graphs"] = args.trials
    if args.algorithms is not None:
        overrides["algorithms"] = args.algorithms
    base = default_config(data["test_case"]).to_dict()
    base.update(data)
    base.update(overrides)
    return ExperimentConfig.from_dict(base)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = load_config(args)
    except (ParameterError, TypeError) as exc:
        parser.print_usage(sys.stderr)
        print(f"robust-gfi: error: {exc}", file=sys.stderr)
        return 2
    out = args.out or Path(f"{cfg.test_case}.csv")
    try:
        records = run_sweep(cfg, jobs=args.jobs)
        write_csv(records, out)
        if args.plot_data is not None:
            write_plot_data(records, args.plot_data)
    except (OSError, ParameterError) as exc:
        print(f"robust-gfi: error: {exc}", file=sys.stderr)
        return 1
    failures = sum(r.failures for r in records)
    if failures:
        logger.warning("%d algorithm runs failed; see the failures column", failures)
    logger.info("wrote %d records to %s", len(records), out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
