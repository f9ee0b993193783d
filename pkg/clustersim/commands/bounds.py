import logging
from typing import Dict

from clustersim.schemas import RunConfig
from clustersim.services import REFERENCE_VALUES
from clustersim.services.bounds import bound_report, verify_suite
from clustersim.services.experiment import CorrelationExperiment
from clustersim.services.report_writer import RunDirectory

logger = logging.getLogger(__name__)


def cmd_bounds(config: RunConfig, run: RunDirectory, simulate_tables: bool = False) -> Dict:
    """Spin-photon and spin-photon-photon bounds plus the phase-jitter verification suite"""
    options = config.bounds
    simulated = None
    if simulate_tables:
        simulated = CorrelationExperiment(config.qd, config.monte_carlo).truth_tables()

    report = bound_report(options.measured, options.s_x, simulated)
    report["published_f_sp"] = REFERENCE_VALUES["f_sp"]
    report["published_f_s2p"] = REFERENCE_VALUES["f_s2p"]
    report["measured_tables"] = options.measured
    if simulated is not None:
        report["simulated_tables"] = simulated

    suite = verify_suite(options.n_processes, options.seed)
    report["verification"] = suite.to_dict()
    if not suite.all_hold:
        logger.error(f"{suite.failures} phase-jitter processes violate the bound")

    run.write_json("bounds.json", report)
    return report


def register(subparsers):
    parser = subparsers.add_parser("bounds", help="entanglement fidelity bounds")
    parser.add_argument("--simulate-tables", action="store_true",
                        help="also evaluate the bound on simulated truth tables")
    parser.set_defaults(handler=lambda config, run, args: cmd_bounds(config, run, args.simulate_tables))
