"""Command line entry point: ``bscluster simulate`` and ``bscluster summarize``."""

from __future__ import annotations

import argparse
import sys

from .errors import BudgetError, ConfigError, MalformedResultsError, NumericError
from .harness import ExperimentPlan, load_plan, run_experiment, summarize

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


def _csv_list(text: str) -> tuple[str, ...]:
    return tuple(x.strip() for x in text.split(",") if x.strip())


def _sweep(text: str):
    key, sep, values = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError("expected key=v1,v2,...")
    try:
        return key.strip(), tuple(float(v) for v in values.split(",") if v.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"non-numeric sweep value in {values!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bscluster", description="Long-term BS clustering experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a Monte Carlo experiment and write a CSV")
    sim.add_argument("--config", help="TOML config file (defaults when omitted)")
    sim.add_argument("--seed", type=int, help="master seed")
    sim.add_argument("--out", default="results.csv", help="output CSV (default: results.csv)")
    sim.add_argument("--drops", type=int, help="number of network drops")
    sim.add_argument("--fading", type=int, help="fading blocks per drop")
    sim.add_argument("--methods", type=_csv_list, help="comma-separated clustering methods")
    sim.add_argument("--precoders", type=_csv_list, help="comma-separated precoders")
    sim.add_argument("--sweep", type=_sweep, help="parameter sweep, e.g. snr_db=0,10,20")
    sim.add_argument("--workers", type=int, help="parallel worker processes")
    sim.add_argument("--timing", action="store_true", default=None, help="add a wall_time column")
    sim.add_argument("--log-dir", help="write formation traces here")
    sim.add_argument("--quiet", action="store_true", help="do not print the summary")

    summ = sub.add_parser("summarize", help="aggregate a result CSV")
    summ.add_argument("--in", dest="path", required=True, help="result CSV")
    return parser


def _simulate(args) -> int:
    overrides = dict(master_seed=args.seed, num_drops=args.drops, num_fading_per_drop=args.fading,
                     methods=args.methods, precoders=args.precoders, sweep=args.sweep, workers=args.workers,
                     timing=args.timing, log_dir=args.log_dir)
    if args.config:
        plan = load_plan(args.config, **overrides)
    else:
        plan = ExperimentPlan(**{k: v for k, v in overrides.items() if v is not None})
    result = run_experiment(plan, args.out)
    if not args.quiet:
        sys.stdout.write(result.summary)
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _simulate(args)
        sys.stdout.write(summarize(args.path))
        return EXIT_OK
    except (ConfigError, BudgetError, MalformedResultsError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
