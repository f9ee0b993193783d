import logging
from typing import Dict, List, Optional

from clustersim.exceptions import ChainLengthError
from clustersim.schemas import RunConfig
from clustersim.services import REFERENCE_VALUES
from clustersim.services.process_map import (
    MAX_CHAIN, ProcessMapService, compose_and_fidelity, ideal_initial_spin, ideal_step_map,
)
from clustersim.services.report_writer import RunDirectory, encode_complex_matrix

logger = logging.getLogger(__name__)


def cmd_fidelity(config: RunConfig, run: RunDirectory, k_max: Optional[int] = None,
                 ideal: Optional[bool] = None, scan: Optional[List[float]] = None) -> Dict:
    """F_k table for the simulated (or ideal) one-step process map"""
    options = config.fidelity
    k_max = options.k_max if k_max is None else k_max
    ideal = options.ideal if ideal is None else ideal
    if not 1 <= k_max <= MAX_CHAIN:
        raise ChainLengthError(f"k_max={k_max} outside 1..{MAX_CHAIN}")

    if ideal:
        process = ideal_step_map()
        chain = [compose_and_fidelity(process, k, ideal_initial_spin()) for k in range(1, k_max + 1)]
        payload = {
            "ideal": True,
            "fidelities": [f for _, f in chain],
            "stderr": [0.0] * k_max,
            "process_map": encode_complex_matrix(process.matrix),
        }
        run.write_json("fidelity.json", payload)
        return payload

    service = ProcessMapService(
        config.qd, config.monte_carlo, convergence_tolerance=options.convergence_tolerance
    )
    if options.condition_time_ps is not None:
        service = service.with_condition(options.condition_time_ps)
    report = service.fidelities(k_max, options.average_mode, batches=options.batches)

    payload = {
        "ideal": False,
        "fidelities": report.fidelities,
        "stderr": report.stderr,
        "traces": report.traces,
        "average_mode": report.average_mode,
        "n_samples": report.n_samples,
        "condition_time_ps": service.condition_time(),
        "min_choi_eigenvalue": report.min_choi_eigenvalue,
        "monotone_non_increasing": all(
            b <= a + 1e-12 for a, b in zip(report.fidelities, report.fidelities[1:])
        ),
        "published_fidelities": REFERENCE_VALUES["cluster_fidelities"][:k_max],
    }
    if report.process is not None:
        payload["process_map"] = encode_complex_matrix(report.process.matrix)
    if scan:
        payload["condition_time_scan"] = [
            {"t_ps": t, "f_1": f} for t, f in service.scan_condition_time(scan)
        ]
    run.write_json("fidelity.json", payload)
    return payload


def register(subparsers):
    parser = subparsers.add_parser("fidelity", help="k-step cluster-state fidelities")
    parser.add_argument("--k-max", type=int, default=None, help="longest chain (1-4)")
    parser.add_argument("--ideal", action="store_true", default=None, help="use the ideal step map")
    parser.add_argument("--scan", type=float, nargs="+", default=None,
                        help="condition times (ps) for a one-step fidelity scan")
    parser.set_defaults(handler=lambda config, run, args: cmd_fidelity(
        config, run, args.k_max, args.ideal, args.scan
    ))
