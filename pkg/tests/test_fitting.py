import numpy as np
import pandas as pd
import pytest

from clustersim.exceptions import DatasetError
from clustersim.schemas import FitOptions, FitStart, MonteCarloConfig
from clustersim.services.fitting import (
    DATASET_COLUMNS, FREE_PARAMETERS, PARAMETER_BOUNDS, FitProblem, load_dataset, scale_parameters,
    synthesize_dataset, unscale_parameters, validate_dataset,
)

GRID = [300.0, 900.0, 1500.0, 2100.0, 2700.0]
TRUTH = {"g_e": 0.60, "g_h": 0.3, "theta": 0.4, "sigma_o_mT": 10.5}


@pytest.fixture
def fit_mc():
    return MonteCarloConfig(n_samples=3, master_seed=17)


@pytest.fixture
def dataset(params, fit_mc):
    return synthesize_dataset(params, fit_mc, GRID)


def test_dataset_requires_columns():
    with pytest.raises(DatasetError):
        validate_dataset(pd.DataFrame({"t23_ps": [100.0], "value": [0.5]}))
    with pytest.raises(DatasetError):
        validate_dataset(pd.DataFrame(columns=DATASET_COLUMNS))


def test_dataset_rejects_zero_uncertainty():
    frame = pd.DataFrame({"t23_ps": [100.0, 200.0], "quantity": ["P(R2|R3)"] * 2,
                          "value": [0.5, 0.4], "stderr": [0.01, 0.0]})
    with pytest.raises(DatasetError):
        validate_dataset(frame)


def test_load_dataset(tmp_path, dataset):
    path = tmp_path / "curves.csv"
    dataset.to_csv(path, index=False)
    loaded = load_dataset(path)
    assert list(loaded.columns) == DATASET_COLUMNS
    assert len(loaded) == len(dataset)
    with pytest.raises(DatasetError):
        load_dataset(tmp_path / "missing.csv")


def test_synthesized_dataset(dataset):
    assert set(dataset["quantity"]) <= {"P(R2|R3)", "P(R2|L3)", "P(H2|R3)", "P(H2|L3)", "P(D2|R3)", "P(D2|L3)"}
    assert (dataset["stderr"] >= 0.01).all()
    assert len(dataset) == 6 * len(GRID)


def test_parameter_scaling():
    x = scale_parameters(TRUTH)
    assert np.all((0.0 <= x) & (x <= 1.0))
    assert unscale_parameters(x) == pytest.approx(TRUTH)
    clipped = unscale_parameters(np.array([-1.0, 2.0, 0.5, 0.0]))
    assert clipped["g_e"] == PARAMETER_BOUNDS["g_e"][0]
    assert clipped["g_h"] == PARAMETER_BOUNDS["g_h"][1]


def test_objective_vanishes_at_generating_parameters(params, fit_mc, dataset):
    problem = FitProblem(dataset, params, fit_mc)
    assert problem.objective(TRUTH) == pytest.approx(0.0, abs=1e-12)


def test_objective_is_deterministic_and_order_independent(params, fit_mc, dataset):
    trial = {"g_e": 0.55, "g_h": 0.25, "theta": 0.5, "sigma_o_mT": 9.0}
    problem = FitProblem(dataset, params, fit_mc)
    first = problem.objective(trial)
    assert problem.objective(trial) == first
    shuffled = dataset.sample(frac=1.0, random_state=4).reset_index(drop=True)
    assert FitProblem(shuffled, params, fit_mc).objective(trial) == first


def test_wrong_larmor_frequency_is_penalized(params, fit_mc, dataset):
    problem = FitProblem(dataset.assign(stderr=0.01), params, fit_mc)
    wrong = {**TRUTH, "g_e": 1.2}
    assert problem.objective(wrong) > 10 * len(dataset)


def test_start_outside_bounds_rejected(params, fit_mc, dataset):
    options = FitOptions(start=FitStart(g_e=0.95))
    with pytest.raises(DatasetError):
        FitProblem(dataset, params, fit_mc, options).fit()


def test_initial_simplex_stays_in_unit_cube(params, fit_mc, dataset):
    problem = FitProblem(dataset, params, fit_mc, FitOptions(initial_step=0.3))
    simplex = problem.initial_simplex(np.array([0.9, 0.1, 0.5, 1.0]))
    assert simplex.shape == (len(FREE_PARAMETERS) + 1, len(FREE_PARAMETERS))
    assert np.all((simplex >= 0.0) & (simplex <= 1.0))


def test_short_fit_improves_and_respects_bounds(params, fit_mc, dataset):
    options = FitOptions(max_iterations=12)
    result = FitProblem(dataset, params, fit_mc, options).fit()
    assert result.objective <= result.start_objective
    assert result.iterations <= 12
    for name in FREE_PARAMETERS:
        lo, hi = PARAMETER_BOUNDS[name]
        assert lo <= result.params[name] <= hi
    payload = result.to_dict()
    assert payload["n_points"] == len(dataset)
    assert len(payload["trace"]) == len(result.trace)
