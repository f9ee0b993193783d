"""Derivative-free fit of (g_e, g_h, theta, sigma_O) to correlation curves.

The objective is the weighted sum of squares between simulated and
measured curve points. Every evaluation reuses the same Monte-Carlo seed,
so the Overhauser draws only rescale with sigma_O and the objective is a
deterministic function of the parameters.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from clustersim.exceptions import DatasetError
from clustersim.schemas import FitOptions, FitStart, MonteCarloConfig, QDParams
from clustersim.services.experiment import CorrelationExperiment
from clustersim.services.overhauser import MonteCarloService

logger = logging.getLogger(__name__)

DATASET_COLUMNS = ["t23_ps", "quantity", "value", "stderr"]
FREE_PARAMETERS = ("g_e", "g_h", "theta", "sigma_o_mT")
PARAMETER_BOUNDS: Dict[str, Tuple[float, float]] = {
    "g_e": (0.3, 0.9),
    "g_h": (0.0, 0.8),
    "theta": (0.0, np.pi / 2.0),
    "sigma_o_mT": (0.0, 30.0),
}
DEFAULT_FIT_QUANTITIES = (
    "P(R2|R3)", "P(R2|L3)", "P(H2|R3)", "P(H2|L3)", "P(D2|R3)", "P(D2|L3)",
)
# Prediction used where a conditional ratio is undefined at the trial parameters
UNDEFINED_PREDICTION = 0.5


def validate_dataset(frame: pd.DataFrame) -> pd.DataFrame:
    missing = [c for c in DATASET_COLUMNS if c not in frame.columns]
    if missing:
        raise DatasetError(f"dataset is missing columns {missing}")
    if frame.empty:
        raise DatasetError("dataset has no rows")
    frame = frame[DATASET_COLUMNS].copy()
    frame["quantity"] = frame["quantity"].astype(str)
    for column in ("t23_ps", "value", "stderr"):
        frame[column] = pd.to_numeric(frame[column], errors="coerce")
    if frame[["t23_ps", "value", "stderr"]].isna().any().any():
        raise DatasetError("dataset contains non-numeric or missing values")
    if (frame["stderr"] <= 0).any():
        bad = int((frame["stderr"] <= 0).sum())
        raise DatasetError(f"{bad} dataset rows have zero or negative uncertainty")
    if (frame["t23_ps"] <= 0).any():
        raise DatasetError("dataset delays must be positive")
    return frame


def load_dataset(path: Union[str, Path]) -> pd.DataFrame:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    return validate_dataset(pd.read_csv(path))


def synthesize_dataset(params: QDParams, mc: MonteCarloConfig, t23_grid: Sequence[float],
                       quantities: Sequence[str] = DEFAULT_FIT_QUANTITIES,
                       stderr_floor: float = 0.01, noise_seed: Optional[int] = None,
                       monte_carlo: Optional[MonteCarloService] = None) -> pd.DataFrame:
    """Simulated curves in dataset form, optionally with Gaussian noise at the stated errors"""
    frame = CorrelationExperiment(params, mc, monte_carlo).curves(t23_grid).to_frame()
    frame = frame[frame["quantity"].isin(quantities)].reset_index(drop=True)
    frame["stderr"] = np.maximum(frame["stderr"].to_numpy(), stderr_floor)
    if noise_seed is not None:
        rng = np.random.default_rng(noise_seed)
        frame["value"] = frame["value"] + rng.normal(0.0, frame["stderr"].to_numpy())
    return validate_dataset(frame)


def scale_parameters(values: Dict[str, float]) -> np.ndarray:
    return np.array([
        (values[name] - PARAMETER_BOUNDS[name][0]) / (PARAMETER_BOUNDS[name][1] - PARAMETER_BOUNDS[name][0])
        for name in FREE_PARAMETERS
    ])


def unscale_parameters(x: np.ndarray) -> Dict[str, float]:
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return {
        name: float(lo + xi * (hi - lo))
        for name, xi, (lo, hi) in zip(FREE_PARAMETERS, x, (PARAMETER_BOUNDS[n] for n in FREE_PARAMETERS))
    }


@dataclass
class FitIteration:
    iteration: int
    params: Dict[str, float]
    objective: float


@dataclass
class FitResult:
    params: Dict[str, float]
    objective: float
    converged: bool
    iterations: int
    evaluations: int
    n_points: int
    start_objective: float
    trace: List[FitIteration] = field(default_factory=list)
    message: str = ""

    def to_dict(self) -> Dict:
        return {
            "params": self.params,
            "objective": self.objective,
            "reduced_objective": self.objective / max(self.n_points - len(FREE_PARAMETERS), 1),
            "converged": self.converged,
            "iterations": self.iterations,
            "evaluations": self.evaluations,
            "n_points": self.n_points,
            "start_objective": self.start_objective,
            "message": self.message,
            "trace": [{"iteration": t.iteration, "objective": t.objective, **t.params} for t in self.trace],
        }


class FitProblem:
    """Fixed T1, B and t12 from the base parameters; g_e, g_h, theta, sigma_O free"""

    def __init__(self, dataset: pd.DataFrame, base: QDParams, mc: MonteCarloConfig,
                 options: Optional[FitOptions] = None, monte_carlo: Optional[MonteCarloService] = None):
        self.dataset = validate_dataset(dataset)
        self.base = base
        self.mc = mc
        self.options = options or FitOptions()
        self.monte_carlo = monte_carlo or MonteCarloService()
        self.grid = np.sort(self.dataset["t23_ps"].unique())
        self.evaluations = 0

    def check_bounds(self, values: Dict[str, float]):
        for name in FREE_PARAMETERS:
            lo, hi = PARAMETER_BOUNDS[name]
            if not lo <= values[name] <= hi:
                raise DatasetError(f"{name}={values[name]} outside fit bounds [{lo}, {hi}]")

    def simulate(self, values: Dict[str, float]) -> pd.DataFrame:
        params = self.base.with_updates(**values)
        return CorrelationExperiment(params, self.mc, self.monte_carlo).curves(self.grid).to_frame()

    def objective(self, values: Dict[str, float]) -> float:
        """Sum of ((sim - data) / stderr)^2 over the dataset points"""
        self.evaluations += 1
        simulated = self.simulate(values)[["t23_ps", "quantity", "value"]].rename(columns={"value": "sim"})
        merged = self.dataset.merge(simulated, on=["t23_ps", "quantity"], how="left")
        undefined = int(merged["sim"].isna().sum())
        if undefined:
            logger.warning(f"{undefined} dataset points have no simulated counterpart at {values}")
            merged["sim"] = merged["sim"].fillna(UNDEFINED_PREDICTION)
        merged = merged.sort_values(["t23_ps", "quantity", "value", "stderr"], kind="mergesort")
        residuals = (merged["sim"].to_numpy() - merged["value"].to_numpy()) / merged["stderr"].to_numpy()
        return float(np.sum(residuals ** 2))

    def start_values(self) -> Dict[str, float]:
        start: FitStart = self.options.start
        values = {name: getattr(start, name) for name in FREE_PARAMETERS}
        self.check_bounds(values)
        return values

    def initial_simplex(self, x0: np.ndarray) -> np.ndarray:
        step = self.options.initial_step
        simplex = [x0]
        for i in range(len(x0)):
            vertex = x0.copy()
            vertex[i] = x0[i] + step if x0[i] + step <= 1.0 else x0[i] - step
            simplex.append(vertex)
        return np.array(simplex)

    def fit(self) -> FitResult:
        x0 = scale_parameters(self.start_values())
        cache: Dict[Tuple[float, ...], float] = {}

        def scaled_objective(x: np.ndarray) -> float:
            key = tuple(float(v) for v in np.clip(x, 0.0, 1.0))
            if key not in cache:
                cache[key] = self.objective(unscale_parameters(np.array(key)))
            return cache[key]

        trace: List[FitIteration] = []

        def record(xk: np.ndarray):
            value = scaled_objective(xk)
            trace.append(FitIteration(len(trace) + 1, unscale_parameters(xk), value))
            logger.info(f"Fit iteration {len(trace)}: objective {value:.4f}")

        start_objective = scaled_objective(x0)
        logger.info(f"Fitting {len(self.dataset)} points, start objective {start_objective:.4f}")
        result = minimize(
            scaled_objective, x0, method="Nelder-Mead",
            bounds=[(0.0, 1.0)] * len(FREE_PARAMETERS),
            callback=record,
            options={
                "xatol": self.options.simplex_tolerance,
                "fatol": np.inf,
                "maxiter": self.options.max_iterations,
                "initial_simplex": self.initial_simplex(x0),
            },
        )

        best_x = np.clip(result.x, 0.0, 1.0)
        best = scaled_objective(best_x)
        if start_objective < best:
            best_x, best = x0, start_objective
        converged = bool(result.success)
        if not converged:
            logger.warning(f"Fit did not converge ({result.message}); returning best point found")
        return FitResult(
            params=unscale_parameters(best_x),
            objective=best,
            converged=converged,
            iterations=int(result.nit),
            evaluations=self.evaluations,
            n_points=len(self.dataset),
            start_objective=start_objective,
            trace=trace,
            message=str(result.message),
        )


def fit(problem: FitProblem) -> FitResult:
    return problem.fit()
