import numpy as np
import pytest

from clustersim.exceptions import NonHermitianError, SequenceError
from clustersim.services.dynamics import (
    Propagators, final_window_ps, invariant_residuals, liouvillian, propagate,
)
from clustersim.services.operator_core import trace_row, unvec, vec
from clustersim.services.qd_model import (
    POLARIZATION_LABELS, TRION_UP, basis_operator, collapse_operators, embed_spin_state, polarization,
)
from tests.conftest import random_density_matrix


def test_liouvillian_rejects_non_hermitian_hamiltonian(params):
    h = np.zeros((4, 4), dtype=complex)
    h[0, 1] = 1.0
    with pytest.raises(NonHermitianError):
        liouvillian(h, collapse_operators(params))


def test_negative_time_rejected(params):
    props = Propagators.for_sample(params)
    with pytest.raises(SequenceError):
        propagate(props.generator, -1.0)


def test_full_propagator_preserves_trace(params, rng):
    props = Propagators.for_sample(params, (4.0, -2.0, 9.0))
    row = trace_row(4)
    for t in (0.0, 50.0, 810.0, 6000.0):
        assert np.allclose(row @ props.full(t), row, atol=1e-10)


@pytest.mark.parametrize("label", POLARIZATION_LABELS)
def test_bright_and_no_click_add_up(params, rng, label):
    props = Propagators.for_sample(params, (1.0, 2.0, 3.0))
    v = vec(random_density_matrix(rng, 4))
    pol = polarization(label)
    split = props.bright(pol, 810.0) @ v + props.no_click(pol, 810.0) @ v
    assert np.allclose(split, props.full(810.0) @ v, atol=1e-12)


def test_jump_superoperators_sum_to_same_total(params):
    props = Propagators.for_sample(params)
    circular = props.jump(polarization("R")) + props.jump(polarization("L"))
    linear = props.jump(polarization("H")) + props.jump(polarization("V"))
    diagonal = props.jump(polarization("D")) + props.jump(polarization("A"))
    assert np.allclose(circular, linear, atol=1e-14)
    assert np.allclose(circular, diagonal, atol=1e-14)


def test_bright_population_follows_radiative_decay(ideal_params):
    params = ideal_params.with_updates(eta=0.5)
    props = Propagators.for_sample(params)
    trion = vec(basis_operator(TRION_UP, TRION_UP))
    row = trace_row(4)
    for t in (100.0, 400.0, 1000.0):
        emitted = row @ props.bright(polarization("R"), t) @ trion
        assert emitted.real == pytest.approx(0.5 * (1 - np.exp(-t / 200.0)), abs=1e-10)
        assert abs(row @ props.bright(polarization("L"), t) @ trion) < 1e-12


def test_ground_state_emits_nothing(params):
    props = Propagators.for_sample(params)
    ground = vec(embed_spin_state(np.eye(2) / 2))
    assert np.allclose(props.bright(polarization("H"), 810.0) @ ground, 0.0, atol=1e-14)


def test_bright_state_is_positive(params):
    props = Propagators.for_sample(params, (5.0, 0.0, 0.0))
    trion = vec(basis_operator(TRION_UP, TRION_UP))
    rho = unvec(props.bright(polarization("D"), 810.0) @ trion)
    assert np.min(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))) > -1e-12


def test_propagators_are_cached(params):
    props = Propagators.for_sample(params)
    assert props.full(810.0) is props.full(810.0)
    pol = polarization("H")
    assert props.no_click(pol, 810.0) is props.no_click(polarization("H"), 810.0)


def test_final_window_length():
    assert final_window_ps(200.0) == 6000.0
    assert final_window_ps(300.0) == 9000.0


def test_invariant_residuals_are_tiny(params):
    residuals = invariant_residuals(params, n_states=20, seed=5)
    assert set(residuals) == {"trace", "completeness", "basis_sum", "efficiency"}
    assert max(residuals.values()) <= 1e-9
