import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from clustersim.exceptions import ConfigError, DimensionError, TruthTableError
from clustersim.schemas import TruthTable
from clustersim.services.bounds import (
    PhaseJitterProcess, blinov_bound, bound_report, classify_emission_operator, emit_twice, f_s2p,
    phase_isometry, random_processes, s_x_from_table, truth_table, verify_bound, verify_suite,
)

PERFECT = dict(
    p_v_up=1.0, p_h_up=0.0, p_v_down=0.0, p_h_down=1.0,
    p_sp_up=0.0, p_sm_up=1.0, p_sp_down=1.0, p_sm_down=0.0,
)
MIXED = {name: 0.5 for name in PERFECT}

# entry -> sign of the bound's response to increasing it
RESPONSE = {
    "p_v_up": 1, "p_h_down": 1, "p_sm_up": 1, "p_sp_down": 1,
    "p_h_up": -1, "p_v_down": -1, "p_sp_up": -1, "p_sm_down": -1,
}


def test_bound_on_measured_tables():
    bound = blinov_bound(TruthTable())
    assert bound.value == pytest.approx(0.6514, abs=1e-3)
    assert bound.stderr > 0.0
    assert bound.entangled


def test_perfect_and_mixed_tables():
    assert blinov_bound(TruthTable(**PERFECT)).value == pytest.approx(1.0)
    mixed = blinov_bound(TruthTable(**MIXED))
    assert mixed.value == pytest.approx(0.0)
    assert not mixed.entangled


@pytest.mark.parametrize("name", sorted(RESPONSE))
def test_bound_monotone_in_each_entry(name):
    base = TruthTable().model_dump()
    base[name] += 0.005
    changed = blinov_bound(TruthTable(**base)).value
    reference = blinov_bound(TruthTable()).value
    assert np.sign(changed - reference) == RESPONSE[name]


def test_invalid_truth_table():
    with pytest.raises(TruthTableError):
        truth_table(p_v_up=1.2)
    with pytest.raises(TruthTableError):
        truth_table(p_v_up=0.5, p_h_up=0.1)


def test_spin_photon_photon_bound():
    assert f_s2p(1.0, -1.0) == pytest.approx(1.0)
    assert f_s2p(0.65, -0.915) == pytest.approx(0.65 * 1.915 / 2)
    assert f_s2p(0.5, 1.0) == 0.0
    with pytest.raises(ConfigError):
        f_s2p(1.5, 0.0)
    with pytest.raises(ConfigError):
        f_s2p(0.5, -1.5)


@given(st.floats(0.0, 1.0), st.floats(-1.0, 1.0))
def test_three_partite_bound_never_exceeds_two_partite(f_sp, s_x):
    assert f_s2p(f_sp, s_x) <= f_sp + 1e-15


def test_s_x_from_measured_table():
    assert s_x_from_table(TruthTable()) == pytest.approx(-0.83)


def test_classify_emission_operators(rng):
    family = classify_emission_operator(phase_isometry(0.0))
    assert family.family == "S0" and family.phase == pytest.approx(0.0)
    assert classify_emission_operator(phase_isometry(np.pi / 3)).phase == pytest.approx(np.pi / 3)

    flipped = np.zeros((4, 2), dtype=complex)
    flipped[1, 0] = 1.0
    flipped[2, 1] = -1.0
    s1 = classify_emission_operator(flipped)
    assert s1.family == "S1" and s1.phase == pytest.approx(np.pi)

    xi = rng.normal(size=(2, 2)) + 1j * rng.normal(size=(2, 2))
    assert classify_emission_operator(np.kron(xi, np.array([[1.0], [0.0]]))).family == "S2"
    assert classify_emission_operator(np.kron(xi, np.array([[0.0], [1.0]]))).family == "S3"
    assert classify_emission_operator(np.zeros((4, 2))).family is None
    assert classify_emission_operator(np.ones((4, 2))).family is None


def test_classify_rejects_wrong_shape():
    with pytest.raises(DimensionError):
        classify_emission_operator(np.zeros((2, 4)))


def test_s0_with_global_phase_and_scale():
    k = 0.7 * np.exp(0.4j) * phase_isometry(1.0)
    family = classify_emission_operator(k)
    assert family.family == "S0"
    assert family.phase == pytest.approx(1.0)


@settings(max_examples=30)
@given(st.floats(0.0, 2 * np.pi - 1e-6))
def test_two_emissions_give_same_photons(phi):
    k = phase_isometry(phi)
    rr = emit_twice(k, 0)
    ll = emit_twice(k, 1)
    assert rr[0, 0].real == pytest.approx(1.0)
    assert ll[3, 3].real == pytest.approx(1.0)


def test_emit_twice_rejects_bad_spin():
    with pytest.raises(ConfigError):
        emit_twice(phase_isometry(0.0), 2)


def test_jitter_process_validation():
    with pytest.raises(ConfigError):
        PhaseJitterProcess(np.array([0.0, 1.0]), np.array([0.5, 0.6]))
    with pytest.raises(ConfigError):
        PhaseJitterProcess(np.array([0.0]), np.array([0.5, 0.5]))
    with pytest.raises(ConfigError):
        PhaseJitterProcess(np.array([0.0, 1.0]), np.array([1.5, -0.5]))


def test_point_process_is_perfect():
    check = verify_bound(PhaseJitterProcess.point(0.0))
    assert check.a_true == pytest.approx(1.0)
    assert check.p_v_up == pytest.approx(1.0)
    assert check.f_true == pytest.approx(1.0)
    assert check.holds


def test_two_point_process_term():
    process = PhaseJitterProcess(np.array([0.0, np.pi]), np.array([0.5, 0.5]))
    check = verify_bound(process)
    assert process.fidelity_term() == pytest.approx(0.5)
    assert check.p_prime == pytest.approx(0.5)
    assert check.holds


def test_jitter_map_preserves_trace(rng):
    process = random_processes(1, seed=3)[0]
    channel = process.process_map()
    rho = np.diag([0.3, 0.7]).astype(complex)
    assert np.trace(channel.apply(rho)).real == pytest.approx(1.0)


def test_random_suite_never_violates_bound():
    summary = verify_suite(100, seed=7)
    assert summary.all_hold
    assert summary.failures == 0
    assert summary.to_dict()["n_processes"] == 100


@settings(max_examples=40, deadline=None)
@given(
    st.lists(st.floats(0.0, 2 * np.pi), min_size=1, max_size=5),
    st.floats(0.5, 1.0),
)
def test_bound_holds_for_arbitrary_phases(phases, f_sp):
    weights = np.ones(len(phases)) / len(phases)
    check = verify_bound(PhaseJitterProcess(np.array(phases), weights), f_sp)
    assert check.p_prime == pytest.approx(check.a_true, abs=1e-9)
    assert check.holds


def test_bound_report_verdicts():
    report = bound_report(TruthTable(), -0.915)
    assert report["verdict"] == "entangled"
    assert report["f_s2p"] == pytest.approx(0.6514 * 1.915 / 2, abs=1e-3)
    mixed = bound_report(TruthTable(**MIXED), 0.0)
    assert mixed["verdict"] == "not demonstrated"
