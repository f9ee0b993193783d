import numpy as np
import pytest

from clustersim.exceptions import ChainLengthError, ConvergenceError, SingularSystemError
from clustersim.schemas import MonteCarloConfig
from clustersim.services.operator_core import dagger, kron, partial_trace, projector, sprepost
from clustersim.services.overhauser import sample_field
from clustersim.services.process_map import (
    KET_R, MAX_CHAIN, SPIN_INPUTS, SPIN_KETS, ProcessMap, ProcessMapService, compose,
    compose_and_fidelity, compose_two_qubit, correlations_from_state, ideal_initial_spin, normalized_spin,
    ideal_step_map, process_map_from_correlations, random_density_matrix, state_from_correlations,
    to_two_qubit,
)


def kraus_map(rng, n_kraus=3):
    """Random trace-preserving map from 2x2 spin to 4x4 spin-photon operators"""
    ops = [rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2)) for _ in range(n_kraus)]
    total = sum(dagger(k) @ k for k in ops)
    w, v = np.linalg.eigh(total)
    inv_sqrt = v @ np.diag(w ** -0.5) @ dagger(v)
    ops = [k @ inv_sqrt for k in ops]
    return ProcessMap(sum(sprepost(k, dagger(k)) for k in ops))


def test_ideal_map_emits_r_photon_for_spin_up():
    out = ideal_step_map().apply(projector(SPIN_KETS["up"]))
    photon = partial_trace(out, [2, 2], keep=[1])
    assert np.allclose(photon, np.diag([1.0, 0.0]))


def test_ideal_map_entangles_superposition():
    out = ideal_step_map().apply(projector(SPIN_KETS["plus"]))
    assert np.trace(out @ out).real == pytest.approx(1.0)
    assert np.allclose(partial_trace(out, [2, 2], keep=[0]), np.eye(2) / 2)


def test_ideal_map_is_trace_preserving(rng):
    c = ideal_step_map()
    for _ in range(10):
        rho = random_density_matrix(rng, 2)
        assert np.trace(c.apply(rho)).real == pytest.approx(1.0, abs=1e-12)
    assert c.min_choi_eigenvalue() > -1e-12


def test_correlation_state_round_trip(rng):
    rho = random_density_matrix(rng, 4)
    assert np.allclose(state_from_correlations(correlations_from_state(rho)), rho)


def test_map_reconstructed_from_ideal_correlations():
    ideal = ideal_step_map()
    tables = {name: correlations_from_state(ideal.apply(projector(SPIN_KETS[name]))) for name in SPIN_INPUTS}
    rebuilt = process_map_from_correlations(tables)
    assert np.max(np.abs(rebuilt.matrix - ideal.matrix)) < 1e-7


def test_missing_input_correlations_rejected():
    tables = {"up": np.eye(4)}
    with pytest.raises(SingularSystemError):
        process_map_from_correlations(tables)


@pytest.mark.parametrize("k", range(1, MAX_CHAIN + 1))
def test_ideal_chain_has_unit_fidelity(k):
    rho_k, fidelity = compose_and_fidelity(ideal_step_map(), k, ideal_initial_spin())
    assert rho_k.shape == (2 ** (k + 1), 2 ** (k + 1))
    assert fidelity == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("k", [0, MAX_CHAIN + 1])
def test_chain_length_limits(k):
    with pytest.raises(ChainLengthError):
        compose(ideal_step_map(), k, ideal_initial_spin())


def test_two_qubit_map_acts_like_c_on_fresh_photon(rng):
    c = kraus_map(rng)
    d = to_two_qubit(c)
    rho_s = random_density_matrix(rng, 2)
    assert np.allclose(d.apply(kron(rho_s, projector(KET_R))), c.apply(rho_s))


@pytest.mark.parametrize("k", [1, 2, 3])
def test_both_composition_routes_agree(rng, k):
    c = kraus_map(rng)
    d = to_two_qubit(c)
    for _ in range(5):
        rho_s = random_density_matrix(rng, 2)
        assert np.allclose(compose(c, k, rho_s), compose_two_qubit(d, k, rho_s), atol=1e-9)


def test_chain_stays_normalized(rng):
    c = kraus_map(rng)
    rho = compose(c, 3, random_density_matrix(rng, 2))
    assert np.trace(rho).real == pytest.approx(1.0)
    assert c.hermiticity_residual(n_states=10) < 1e-10


def test_ideal_spin_photon_correlations(ideal_params):
    service = ProcessMapService(ideal_params, MonteCarloConfig(n_samples=1))
    up = service.spin_photon_correlations("up", t=6000.0)
    assert up[0, 0] == pytest.approx(1.0)
    assert up[3, 3] == pytest.approx(1.0, abs=1e-9)
    plus = service.spin_photon_correlations("plus", t=6000.0)
    assert abs(plus[1, 1]) == pytest.approx(1.0, abs=1e-9)


def test_short_window_reports_convergence_error(params):
    service = ProcessMapService(params, MonteCarloConfig(n_samples=1))
    with pytest.raises(ConvergenceError):
        service.sample_moments(sample_field(0, 0, 10.5), 50.0)


def test_simulated_map_is_trace_and_hermiticity_preserving(params, small_mc, rng):
    process = ProcessMapService(params, small_mc).build_process_map()
    assert process.condition_time_ps == params.t12_ps
    for _ in range(5):
        rho = random_density_matrix(rng, 2)
        assert np.trace(process.apply(rho)).real == pytest.approx(1.0, abs=1e-9)
    assert process.hermiticity_residual(n_states=10) < 1e-8


@pytest.mark.parametrize("mode", ["before", "after"])
def test_simulated_fidelities(params, small_mc, mode):
    report = ProcessMapService(params, small_mc).fidelities(k_max=2, average_mode=mode)
    assert report.average_mode == mode
    assert report.n_samples == small_mc.n_samples
    assert len(report.fidelities) == len(report.stderr) == 2
    assert all(0.0 <= f <= 1.0 + 1e-9 for f in report.fidelities)
    assert all(e >= 0.0 for e in report.stderr)
    assert all(t == pytest.approx(1.0, abs=1e-9) for t in report.traces)


def test_fidelity_chain_length_checked(params, small_mc):
    with pytest.raises(ChainLengthError):
        ProcessMapService(params, small_mc).fidelities(k_max=MAX_CHAIN + 1)


def test_condition_time_scan(params):
    service = ProcessMapService(params, MonteCarloConfig(n_samples=2))
    scan = service.scan_condition_time([810.0, 1200.0])
    assert [t for t, _ in scan] == [810.0, 1200.0]
    assert all(0.0 <= f <= 1.0 + 1e-9 for _, f in scan)


def test_heralded_spin_is_a_partial_state(params):
    service = ProcessMapService(params, MonteCarloConfig(n_samples=1))
    rho = service.sample_initial_spin(sample_field(2, 0, 10.5))
    assert rho.shape == (2, 2)
    assert np.allclose(rho, rho.conj().T, atol=1e-12)
    assert 0.0 < np.trace(rho).real < 0.5
    assert np.trace(normalized_spin(rho)).real == pytest.approx(1.0)


def test_spin_without_herald_rejected():
    with pytest.raises(ConvergenceError):
        normalized_spin(np.zeros((2, 2)))


def test_pulse_angle_does_not_degrade_undisturbed_chain(clean_params):
    one = MonteCarloConfig(n_samples=1)
    turned = ProcessMapService(clean_params, one).fidelities(k_max=4).fidelities
    aligned = ProcessMapService(clean_params.with_updates(theta=0.0), one).fidelities(k_max=4).fidelities
    assert turned == pytest.approx(aligned, abs=0.03)
    assert turned[0] > 0.88
    assert all(b < a for a, b in zip(turned, turned[1:]))


def test_lab_detection_axes_lose_the_pulse_phase(clean_params):
    one = MonteCarloConfig(n_samples=1)
    lab = ProcessMapService(clean_params.with_updates(detection_frame="lab"), one).fidelities(k_max=2)
    assert lab.fidelities[0] < 0.85
    assert lab.fidelities[1] < 0.7


def test_first_step_fidelity_near_measured_value(params):
    report = ProcessMapService(params, MonteCarloConfig(n_samples=64, master_seed=20221)).fidelities(k_max=1)
    assert report.fidelities[0] == pytest.approx(0.80, abs=0.05)
