import argparse
import logging
import sys
import traceback
from typing import List, Optional

from pydantic import ValidationError

from clustersim.commands import bounds, correlations, fidelity, fit, load_run_config, rates, reproduce, tags
from clustersim.commands import format_validation_error
from clustersim.exceptions import SimulationError
from clustersim.services.report_writer import RunDirectory
from clustersim.settings import LOG_LEVEL

COMMANDS = (correlations, fidelity, bounds, rates, tags, fit, reproduce)


def configure_logging(verbose: bool = False):
    level = logging.INFO if verbose else getattr(logging, LOG_LEVEL, logging.WARNING)
    logging.basicConfig(level=level, format='%(levelname)s - %(message)s', force=True)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clustersim",
        description="Quantum-dot spin-photon cluster-state simulator",
    )
    parser.add_argument("--config", default=None, help="run configuration JSON")
    parser.add_argument("--seed", type=int, default=None, help="Monte-Carlo master seed")
    parser.add_argument("--samples", type=int, default=None, help="number of Overhauser samples")
    parser.add_argument("--out", default=None, help="output directory")
    parser.add_argument("--verbose", "-v", action="store_true", help="log progress")

    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS:
        module.register(subparsers)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.verbose)

    # Global exception handler
    try:
        config = load_run_config(args.config, seed=args.seed, samples=args.samples, out=args.out)
        run = RunDirectory(config.output_dir, args.command)
        run.echo_config(config)
        args.handler(config, run, args)
        logging.info(f"Results written to {run.path}")
        return 0
    except SimulationError as e:
        logging.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except ValidationError as e:
        logging.error(f"Invalid input: {format_validation_error(e)}")
        return 2
    except Exception as e:
        logging.error(f"Unhandled exception: {str(e)}")
        logging.error(f"Traceback: {traceback.format_exc()}")
        return 1


if __name__ == "__main__":
    sys.exit(main())
