"""Full-size reproductions of the published numbers (run with -m slow)."""

import pytest

from clustersim.commands.reproduce import RUNNERS
from clustersim.schemas import RunConfig


@pytest.fixture(scope="module")
def config():
    return RunConfig()


@pytest.mark.parametrize("item", ["rates", "brightness", "blinov", "bound_suite", "dynamics", "process_map"])
def test_fast_items(config, item):
    assert RUNNERS[item](config)["passed"]


@pytest.mark.slow
@pytest.mark.parametrize("item", ["fidelity", "truth_tables", "parity", "tags"])
def test_monte_carlo_items(config, item):
    result = RUNNERS[item](config)
    assert result["passed"], result


@pytest.mark.slow
def test_fit_recovers_parameters(config):
    result = RUNNERS["fit"](config)
    assert result["passed"], result
