import logging
from typing import Dict

import numpy as np
import pandas as pd

from clustersim.schemas import RunConfig
from clustersim.services.experiment import (
    PHOTON3_LABELS, CorrelationCurves, CorrelationExperiment, default_grid,
)
from clustersim.services.report_writer import RunDirectory

logger = logging.getLogger(__name__)


def bloch_frame(curves: CorrelationCurves) -> pd.DataFrame:
    frames = []
    for p3 in PHOTON3_LABELS:
        vectors, errors = curves.bloch_vectors(p3)
        frames.append(pd.DataFrame({
            "t23_ps": curves.t23_ps,
            "photon3": p3,
            "s_x": vectors[:, 0], "s_y": vectors[:, 1], "s_z": vectors[:, 2],
            "s_x_err": errors[:, 0], "s_y_err": errors[:, 1], "s_z_err": errors[:, 2],
            "norm": np.linalg.norm(vectors, axis=1),
        }))
    return pd.concat(frames, ignore_index=True)


def parity_frame(curves: CorrelationCurves, label: str) -> pd.DataFrame:
    columns = {"t23_ps": curves.t23_ps}
    for p3 in PHOTON3_LABELS:
        ratios = curves.ratio(label, p3)
        columns[f"P({label}2|{p3}3)"] = [r.value if r.defined else np.nan for r in ratios]
        columns[f"P({label}2|{p3}3)_err"] = [r.stderr if r.defined else np.nan for r in ratios]
    return pd.DataFrame(columns)


def cmd_correlations(config: RunConfig, run: RunDirectory) -> Dict:
    """Bloch-vector, circular-parity and linear-parity curves of photon #2"""
    options = config.correlations
    grid = default_grid(options.t23_start_ps, options.t23_stop_ps, options.t23_step_ps)
    experiment = CorrelationExperiment(config.qd, config.monte_carlo)
    curves = experiment.curves(grid)

    run.write_csv("curves.csv", curves.to_frame())
    run.write_csv("bloch_vectors.csv", bloch_frame(curves))
    run.write_csv("parity_circular.csv", parity_frame(curves, "R"))
    run.write_csv("parity_linear.csv", parity_frame(curves, "H"))
    return {"grid_points": int(grid.size), "n_samples": config.monte_carlo.n_samples}


def register(subparsers):
    parser = subparsers.add_parser("correlations", help="three-photon correlation curves")
    parser.set_defaults(handler=lambda config, run, args: cmd_correlations(config, run))
