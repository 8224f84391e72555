import argparse
import sys
from typing import List, Optional

from ipcrlb.core.pipeline import OUTPUT_FILES, ExperimentPipeline
from ipcrlb.core.scenario import load_scenario
from ipcrlb.utils import get_logger
from ipcrlb.utils.config import OUTPUT_DIR
from ipcrlb.utils.errors import ConfigError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ipcrlb",
        description="Bistatic passive radar: measurement uncertainty, tracking bounds and receiver control",
    )
    parser.add_argument("subcommand", choices=list(OUTPUT_FILES), help="Experiment to run")
    parser.add_argument("--config", default=None, help="Scenario JSON file (built-in defaults if omitted)")
    parser.add_argument("--out", default=OUTPUT_DIR, help="Output directory for the CSV file")
    parser.add_argument("--seed", type=int, default=None, help="Override the scenario seed")
    parser.add_argument("--samples", type=int, default=None, help="Override the MC sample count of the bounds")
    parser.add_argument("--runs", type=int, default=None, help="Override the number of Monte Carlo runs")
    parser.add_argument("--threads", type=int, default=None, help="Worker thread cap (default: all cores)")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    logger = get_logger(__name__)
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        scenario = load_scenario(args.config).with_overrides(seed=args.seed, samples=args.samples, runs=args.runs)
        pipeline = ExperimentPipeline(scenario, threads=args.threads)
        result = pipeline.run(args.subcommand, args.out)
        logger.info(f"{args.subcommand} finished! Result: {result}")
    except ConfigError as e:
        logger.error(f"Invalid configuration: {e}")
        return 2
    except Exception as e:
        logger.error(f"{args.subcommand} failed: {e}")
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
