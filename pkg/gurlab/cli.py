"""Command-line front end: verify, sweep, minimize, report.

Exit codes: 0 every relation holds, 1 a relation or check fails, 2 usage or
input error.
"""

import argparse
import logging
import sys
from pathlib import Path
from typing import Any

from pydantic import ValidationError

from gurlab import battery, csv_writer, report, searcher, storage
from gurlab.config import ConfigError, RunConfig, build_config
from gurlab.core import GurError, InvariantError

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_USAGE = 2

LOG_FORMAT = "%(asctime)s [%(levelname)8s] %(message)s (%(filename)s:%(lineno)s)"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON config file (keys mirror the flags)")
    parser.add_argument("--hbar", type=float, help="Reduced Planck constant (default: 1.0)")
    parser.add_argument("--si", action="store_true", default=None, help="Use ħ = 1.054571817e-34 J·s")
    parser.add_argument("--tol", type=float, help="Slack tolerance in natural units (default: per engine)")
    parser.add_argument("--out", type=Path, help="Output file (default: stdout summary only)")
    parser.add_argument("--format", choices=["json", "csv"], help="Output format (default: json)")
    parser.add_argument("-v", "--verbose", action="store_true", default=None, help="Debug logging")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gurlab",
        description="Check uncertainty relations for entangled identical particles",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  %(prog)s verify                                  # Full battery, both engines
  %(prog)s verify --engine grid --out reports.csv --format csv
  %(prog)s sweep --family two_mode_squeezed --r-grid 0:2:0.25 --out sweep.csv --format csv
  %(prog)s minimize --family two_mode_squeezed --objective individual_product --out min.json
  %(prog)s report sweep.csv                        # Summarize a previous run
        """,
    )
    subparsers = parser.add_subparsers(dest="command", help="Available commands")

    verify_parser = subparsers.add_parser("verify", help="Run the built-in state battery")
    _add_common(verify_parser)
    verify_parser.add_argument("--engine", choices=["gaussian", "grid", "both"], help="Engine(s) to run (default: both)")
    verify_parser.add_argument("--seeds", type=int, help="Random states per particle count (default: 1000)")
    verify_parser.add_argument("--seed", type=int, help="First random-state seed (default: 0)")
    verify_parser.add_argument("--squeeze-max", type=float, help="Squeezing range of random states (default: 1.0)")

    sweep_parser = subparsers.add_parser("sweep", help="Evaluate the suite over a parameter grid")
    _add_common(sweep_parser)
    sweep_parser.add_argument("--family", choices=[f.value for f in searcher.StateFamily], help="State family")
    sweep_parser.add_argument("--r-grid", help="start:stop:step, a,b,c or a1,b1;a2,b2")
    sweep_parser.add_argument("--n", type=int, help="Particle count of random_gaussian (2 or 3)")

    minimize_parser = subparsers.add_parser("minimize", help="Minimize an uncertainty product over a family")
    _add_common(minimize_parser)
    minimize_parser.add_argument("--family", choices=[f.value for f in searcher.StateFamily], help="State family")
    minimize_parser.add_argument("--objective", choices=[o.value for o in searcher.Objective], help="Objective")
    minimize_parser.add_argument("--budget", type=int, help="Objective evaluations (default: 200, minimum 10)")
    minimize_parser.add_argument("--seed", type=int, help="Multistart lattice seed (default: 0)")
    minimize_parser.add_argument("--n", type=int, help="Particle count of random_gaussian (2 or 3)")
    minimize_parser.add_argument("--squeeze-max", type=float, help="Squeezing box of random_gaussian (default: 1.0)")

    report_parser = subparsers.add_parser("report", help="Summarize verify/sweep/minimize output")
    report_parser.add_argument("input", type=Path, help="Output file of a previous run")
    report_parser.add_argument("--config", type=Path, help="JSON config file (keys mirror the flags)")
    report_parser.add_argument("-v", "--verbose", action="store_true", default=None, help="Debug logging")
    return parser


def _flags(args: argparse.Namespace) -> dict[str, Any]:
    return {key: value for key, value in vars(args).items() if key not in ("command", "config")}


def _write_output(config: RunConfig, records: list[storage.Record]) -> None:
    if config.out is None:
        return
    if config.format == "csv":
        csv_writer.write_records_csv(records, config.out)
    else:
        storage.write_records_jsonl(records, config.out)


def verify(config: RunConfig) -> int:
    """Run the battery; 0 iff every relation holds and every check passes."""
    battery_config = battery.BatteryConfig(
        engine=config.engine,
        hbar=config.constants.hbar,
        tol=config.tol,
        seed=config.seed,
        seeds=config.seeds,
        squeeze_max=config.squeeze_max,
    )
    try:
        outcome = battery.run_battery(battery_config)
    except GurError as e:
        # Engine refusing a built-in state counts as a failure
        logger.error(f"battery aborted: {e}")
        print(f"FAILED: {e}")
        return EXIT_FAILURE
    _write_output(config, outcome.records)
    failures = outcome.failures
    print(f"verify: {len(outcome.reports)} relation reports, {len(outcome.checks)} checks, {len(failures)} failures")
    if failures:
        print(f"FAILED: {battery.first_failure_message(failures[0])}")
        return EXIT_FAILURE
    return EXIT_OK


def sweep(config: RunConfig) -> int:
    assert config.family is not None
    grid_points = config.r_grid
    if grid_points is None:
        defaults = {
            searcher.StateFamily.TWO_MODE_SQUEEZED: [k / 4 for k in range(9)],
            searcher.StateFamily.CORRELATED_TRIPLE: [k / 5 for k in range(6)],
        }
        if config.family not in defaults:
            raise ConfigError(f"sweep over {config.family} needs --r-grid")
        grid_points = defaults[config.family]

    table = searcher.sweep(
        config.family, grid_points, n=config.n, hbar=config.constants.hbar, tol=config.tol
    )
    if config.out is not None:
        if config.format == "csv":
            csv_writer.write_sweep_csv(table, config.out)
        else:
            storage.save_sweep(table, config.out)
    print(report.summarize_sweep(table), end="")
    return EXIT_OK if table.holds else EXIT_FAILURE


def minimize(config: RunConfig) -> int:
    assert config.family is not None and config.objective is not None
    problem = searcher.SearchProblem(
        family=config.family,
        objective=config.objective,
        n=config.n,
        squeeze_max=config.squeeze_max,
        hbar=config.constants.hbar,
        tol=config.tol,
    )
    try:
        result = searcher.minimize(problem, budget=config.budget, seed=config.seed)
    except InvariantError as e:
        print(f"FAILED: {e}")
        return EXIT_FAILURE
    if config.out is not None:
        if config.format == "csv":
            csv_writer.write_trace_csv(result, config.out)
        else:
            storage.save_search_result(result, config.out)
    print(report.summarize_search(result), end="")
    return EXIT_OK


def run_report(config: RunConfig) -> int:
    assert config.input is not None
    print(report.summarize_file(config.input), end="")
    return EXIT_OK


COMMANDS = {
    "verify": verify,
    "sweep": sweep,
    "minimize": minimize,
    "report": run_report,
}


def main(argv: list[str] | None = None) -> int:
    """Parse arguments, run one subcommand and return its exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK

    if not args.command:
        parser.print_help()
        return EXIT_USAGE

    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format=LOG_FORMAT,
        datefmt=LOG_DATE_FORMAT,
        stream=sys.stderr,
    )

    try:
        config = build_config(args.command, _flags(args), args.config)
        return COMMANDS[config.command](config)
    except (ConfigError, storage.StorageError, ValidationError) as e:
        logger.error(f"{args.command}: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except GurError as e:
        logger.error(f"{args.command} failed: {e}")
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE if isinstance(e, ValueError) else EXIT_FAILURE


def cli() -> None:
    """Entry point for the console script."""
    sys.exit(main())


if __name__ == "__main__":
    cli()
