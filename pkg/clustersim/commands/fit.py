import logging
from typing import Dict, Optional

from clustersim.exceptions import DatasetError
from clustersim.schemas import RunConfig
from clustersim.services import REFERENCE_VALUES
from clustersim.services.fitting import FitProblem, load_dataset
from clustersim.services.report_writer import RunDirectory

logger = logging.getLogger(__name__)


def cmd_fit(config: RunConfig, run: RunDirectory, dataset: Optional[str] = None) -> Dict:
    """Fit g_e, g_h, theta and sigma_O to a correlation-curve dataset"""
    path = dataset or config.fit.dataset
    if not path:
        raise DatasetError("no dataset given (use --dataset or fit.dataset in the config)")
    problem = FitProblem(load_dataset(path), config.qd, config.monte_carlo, config.fit)
    result = problem.fit()

    payload = result.to_dict()
    payload["dataset"] = str(path)
    payload["reference_parameters"] = REFERENCE_VALUES["fit_parameters"]
    run.write_json("fit.json", payload)
    return payload


def register(subparsers):
    parser = subparsers.add_parser("fit", help="fit model parameters to correlation curves")
    parser.add_argument("--dataset", default=None, help="CSV with t23_ps, quantity, value, stderr")
    parser.set_defaults(handler=lambda config, run, args: cmd_fit(config, run, args.dataset))
