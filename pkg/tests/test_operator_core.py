import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clustersim.exceptions import DimensionError, StateError
from clustersim.services.operator_core import (
    PAULI, apply_on_leading, dagger, expm, kron, overlap_fidelity, partial_trace, permute_subsystems,
    projector, spost, spre, sprepost, trace_row, unvec, validate_density_matrix, vec,
)
from tests.conftest import random_complex, random_density_matrix


def taylor_expm(a, terms=60, squarings=8):
    scaled = a / 2 ** squarings
    result = np.eye(a.shape[0], dtype=complex)
    term = np.eye(a.shape[0], dtype=complex)
    for n in range(1, terms):
        term = term @ scaled / n
        result = result + term
    for _ in range(squarings):
        result = result @ result
    return result


def test_kron_matches_index_definition(rng):
    a = random_complex(rng, 2, 3)
    b = random_complex(rng, 3, 2)
    out = kron(a, b)
    assert out.shape == (6, 6)
    for i in range(2):
        for j in range(3):
            for k in range(3):
                for m in range(2):
                    assert out[i * 3 + k, j * 2 + m] == pytest.approx(a[i, j] * b[k, m])


def test_expm_of_zero_and_diagonal():
    assert np.allclose(expm(np.zeros((3, 3))), np.eye(3))
    d = np.diag([0.1, -2.0, 1j])
    assert np.allclose(expm(d), np.diag(np.exp([0.1, -2.0, 1j])))


def test_expm_matches_taylor_series(rng):
    a = random_complex(rng, 4, 4) / 2.0
    expected = taylor_expm(a)
    assert np.max(np.abs(expm(a) - expected)) <= 1e-9 * np.max(np.abs(expected))


def test_expm_rejects_non_square():
    with pytest.raises(DimensionError):
        expm(np.zeros((2, 3)))


def test_expm_of_hermitian_generator_is_unitary(rng):
    g = random_complex(rng, 4, 4)
    h = 1e-3 * (g + dagger(g))
    for t in (0.0, 10.0, 1e4):
        u = expm(-1j * h * t)
        assert np.allclose(u @ dagger(u), np.eye(4), atol=1e-9)


def test_sprepost_matches_matrix_products(rng):
    a, b, x = (random_complex(rng, 3, 3) for _ in range(3))
    assert np.allclose(unvec(sprepost(a, b) @ vec(x)), a @ x @ b)
    assert np.allclose(unvec(spre(a) @ vec(x)), a @ x)
    assert np.allclose(unvec(spost(b) @ vec(x)), x @ b)


def test_vec_stacks_columns():
    x = np.array([[1, 2], [3, 4]])
    assert np.allclose(vec(x), [1, 3, 2, 4])


def test_unvec_rejects_non_square_length():
    with pytest.raises(DimensionError):
        unvec(np.zeros(5))


def test_trace_row(rng):
    x = random_complex(rng, 4, 4)
    assert trace_row(4) @ vec(x) == pytest.approx(np.trace(x))


def test_partial_trace_of_product_state(rng):
    a = random_density_matrix(rng, 2)
    b = random_density_matrix(rng, 3)
    rho = kron(a, b)
    assert np.allclose(partial_trace(rho, [2, 3], keep=[0]), a)
    assert np.allclose(partial_trace(rho, [2, 3], keep=[1]), b)


def test_partial_trace_of_bell_state_is_maximally_mixed():
    bell = np.array([1, 0, 0, 1]) / np.sqrt(2)
    assert np.allclose(partial_trace(projector(bell), [2, 2], keep=[1]), np.eye(2) / 2)


def test_partial_trace_matches_index_sum(rng):
    rho = random_density_matrix(rng, 8)
    t = rho.reshape(2, 2, 2, 2, 2, 2)
    expected = np.zeros((4, 4), dtype=complex)
    for a in range(2):
        for c in range(2):
            for a2 in range(2):
                for c2 in range(2):
                    expected[a * 2 + c, a2 * 2 + c2] = sum(t[a, b, c, a2, b, c2] for b in range(2))
    assert np.allclose(partial_trace(rho, [2, 2, 2], keep=[0, 2]), expected)


def test_partial_trace_dimension_mismatch():
    with pytest.raises(DimensionError):
        partial_trace(np.eye(4), [2, 3], keep=[0])


def test_permute_subsystems_swaps_product(rng):
    a = random_complex(rng, 2, 2)
    b = random_complex(rng, 3, 3)
    assert np.allclose(permute_subsystems(kron(a, b), [2, 3], [1, 0]), kron(b, a))


def test_permute_subsystems_rejects_non_permutation():
    with pytest.raises(DimensionError):
        permute_subsystems(np.eye(4), [2, 2], [0, 0])


def test_apply_on_leading_acts_on_first_factor(rng):
    k = random_complex(rng, 4, 2)
    superop = sprepost(k, dagger(k))
    a = random_density_matrix(rng, 2)
    b = random_density_matrix(rng, 2)
    out = apply_on_leading(superop, 2, 4, kron(a, b))
    assert np.allclose(out, kron(k @ a @ dagger(k), b))


def test_apply_on_leading_entangled_input(rng):
    k = random_complex(rng, 4, 2)
    superop = sprepost(k, dagger(k))
    rho = random_density_matrix(rng, 4)
    big = kron(k, np.eye(2))
    assert np.allclose(apply_on_leading(superop, 2, 4, rho), big @ rho @ dagger(big))


def test_overlap_fidelity():
    up = projector([1, 0])
    down = projector([0, 1])
    assert overlap_fidelity(up, up) == pytest.approx(1.0)
    assert overlap_fidelity(up, down) == pytest.approx(0.0)
    assert overlap_fidelity(up, np.eye(2) / 2) == pytest.approx(0.5)


def test_overlap_fidelity_requires_pure_target():
    with pytest.raises(StateError):
        overlap_fidelity(np.eye(2) / 2, np.eye(2) / 2)


def test_validate_density_matrix():
    with pytest.raises(StateError):
        validate_density_matrix(np.array([[0.5, 1.0], [0.0, 0.5]]))
    with pytest.raises(StateError):
        validate_density_matrix(np.diag([1.5, -0.5]))
    assert np.allclose(validate_density_matrix(np.eye(2) / 2), np.eye(2) / 2)
    validate_density_matrix(np.diag([0.3, 0.0]), normalized=False)


@settings(max_examples=50, deadline=None)
@given(st.integers(min_value=1, max_value=5), st.integers(min_value=0, max_value=2 ** 32 - 1))
def test_vec_unvec_inverse(dim, seed):
    x = random_complex(np.random.default_rng(seed), dim, dim)
    assert np.array_equal(unvec(vec(x)), x)


def test_pauli_algebra():
    assert np.allclose(PAULI["x"] @ PAULI["y"], 1j * PAULI["z"])
