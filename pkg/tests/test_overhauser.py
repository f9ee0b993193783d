import numpy as np
import pytest

from clustersim.exceptions import ConvergenceError, SampleFailureError
from clustersim.schemas import MonteCarloConfig
from clustersim.services.overhauser import MonteCarloService, sample_field


def field_of(sample):
    return np.array(sample.b_o)


def test_sample_depends_only_on_seed_and_index():
    a = sample_field(42, 7, 10.5)
    b = sample_field(42, 7, 10.5)
    assert a == b
    assert sample_field(42, 8, 10.5).b_o != a.b_o
    assert sample_field(43, 7, 10.5).b_o != a.b_o


def test_samples_list_matches_individual_draws():
    config = MonteCarloConfig(n_samples=10, master_seed=99)
    samples = MonteCarloService(workers=1).samples(config, 10.5)
    assert [s.sample_index for s in samples] == list(range(10))
    assert samples[5] == sample_field(99, 5, 10.5)


def test_zero_disorder_evaluates_single_sample():
    config = MonteCarloConfig(n_samples=500, master_seed=1)
    samples = MonteCarloService(workers=1).samples(config, 0.0)
    assert len(samples) == 1
    assert samples[0].b_o == (0.0, 0.0, 0.0)


def test_field_spread_matches_sigma():
    config = MonteCarloConfig(n_samples=3000, master_seed=2024)
    fields = np.array([field_of(s) for s in MonteCarloService(workers=1).samples(config, 10.5)])
    assert np.std(fields, ddof=1) == pytest.approx(10.5, rel=0.05)
    assert abs(np.mean(fields)) < 0.5


def test_result_independent_of_worker_count():
    config = MonteCarloConfig(n_samples=40, master_seed=5)
    serial = MonteCarloService(workers=1).evaluate(config, 10.5, field_of)
    threaded = MonteCarloService(workers=4).evaluate(config, 10.5, field_of)
    assert np.array_equal(serial, threaded)


def test_reduce_mean_and_standard_error(rng):
    stack = rng.normal(size=(25, 3))
    estimate = MonteCarloService.reduce(stack)
    assert np.allclose(estimate.mean, stack.mean(axis=0))
    assert np.allclose(estimate.stderr, stack.std(axis=0, ddof=1) / 5.0)
    assert estimate.n_samples == 25


def test_reduce_single_sample_has_zero_error():
    estimate = MonteCarloService.reduce(np.ones((1, 2)))
    assert np.array_equal(estimate.stderr, np.zeros(2))


def test_failing_sample_is_reported_with_index():
    def simulation(sample):
        if sample.sample_index == 3:
            raise ValueError("boom")
        return np.zeros(1)

    config = MonteCarloConfig(n_samples=6, master_seed=0)
    with pytest.raises(SampleFailureError) as info:
        MonteCarloService(workers=1).evaluate(config, 1.0, simulation)
    assert info.value.sample_index == 3
    assert isinstance(info.value.cause, ValueError)
    assert info.value.exit_code == 3


def test_sample_failure_keeps_cause_exit_code():
    def simulation(sample):
        raise ConvergenceError("not decayed")

    config = MonteCarloConfig(n_samples=2, master_seed=0)
    with pytest.raises(SampleFailureError) as info:
        MonteCarloService(workers=1).evaluate(config, 1.0, simulation)
    assert info.value.exit_code == ConvergenceError.exit_code
