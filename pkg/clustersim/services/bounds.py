"""Measurement-based fidelity bounds and the phase-jitter verifier.

The spin-photon bound is built from the two truth tables of photon #2
conditioned on the spin readout:

    F_sp >= 1/2 (rho_upV + rho_downH - 2 sqrt(rho_upH rho_downV)) + Pi / 2

with joint probabilities rho = P(.|spin) / 2 (spin maximally mixed before
the herald) and the rotated-basis parity

    Pi = 1/2 [P(s-|up) + P(s+|down) - P(s+|up) - P(s-|down)].

The phase-jitter verifier checks that the bound derived from an ideally
controlled measurement never exceeds the true post-emission fidelity term
A = sum_k w_k |1 + exp(i phi_k)|^2 / 4.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import ValidationError

from clustersim.exceptions import ConfigError, DimensionError, TruthTableError
from clustersim.schemas import TruthTable
from clustersim.services.operator_core import (
    apply_on_leading, dagger, kron, partial_trace, projector, sprepost, unvec, vec,
)
from clustersim.services.process_map import ProcessMap, rotation_quarter
from clustersim.services.qd_model import polarization

logger = logging.getLogger(__name__)

ENTANGLEMENT_THRESHOLD = 0.5
CLASSIFY_TOL = 1e-9
BOUND_SLACK = 1e-12

_S = 1.0 / np.sqrt(2.0)


@dataclass(frozen=True)
class BoundEstimate:
    value: float
    stderr: float

    @property
    def entangled(self) -> bool:
        return self.value > ENTANGLEMENT_THRESHOLD


def truth_table(**values) -> TruthTable:
    """Build a TruthTable, reporting invalid entries as TruthTableError"""
    try:
        return TruthTable(**values)
    except ValidationError as e:
        raise TruthTableError(f"invalid truth table: {e}") from e


def blinov_bound(table: TruthTable) -> BoundEstimate:
    """Spin-photon fidelity lower bound from the linear and circular truth tables.

    Tables with every entry 0.5 give exactly 0.0 here. A worked example quoted
    alongside the measured data gives 0.25 for that case, which does not follow
    from this formula. The formula reproduces 0.6514 on the measured tables;
    keep it.
    """
    rho_up_v = table.p_v_up / 2.0
    rho_up_h = table.p_h_up / 2.0
    rho_down_v = table.p_v_down / 2.0
    rho_down_h = table.p_h_down / 2.0
    parity = 0.5 * (table.p_sm_up + table.p_sp_down - table.p_sp_up - table.p_sm_down)

    cross = np.sqrt(rho_up_h * rho_down_v)
    value = 0.5 * (rho_up_v + rho_down_h - 2.0 * cross) + 0.5 * parity

    # Linear propagation, derivatives taken w.r.t. the conditional probabilities
    if rho_up_h > 0.0 and rho_down_v > 0.0:
        d_h_up = -0.25 * np.sqrt(table.p_v_down / table.p_h_up)
        d_v_down = -0.25 * np.sqrt(table.p_h_up / table.p_v_down)
    else:
        d_h_up = d_v_down = 0.0
    gradient = {
        "p_v_up": 0.25, "p_h_down": 0.25, "p_h_up": d_h_up, "p_v_down": d_v_down,
        "p_sm_up": 0.25, "p_sp_down": 0.25, "p_sp_up": -0.25, "p_sm_down": -0.25,
    }
    variance = sum((g * table.sigma(name)) ** 2 for name, g in gradient.items())
    return BoundEstimate(float(value), float(np.sqrt(variance)))


def f_s2p(f_sp: float, s_x: float) -> float:
    """Spin-photon-photon bound F_sp (1 - s_x) / 2"""
    if not 0.0 <= f_sp <= 1.0:
        raise ConfigError(f"f_sp={f_sp} outside [0, 1]")
    if not -1.0 <= s_x <= 1.0:
        raise ConfigError(f"s_x={s_x} outside [-1, 1]")
    return f_sp * (1.0 - s_x) / 2.0


def s_x_from_table(table: TruthTable) -> float:
    """Photon #2 projection on the rotated spin axis from the H/V truth table"""
    return 0.5 * ((table.p_h_up - table.p_v_up) + (table.p_v_down - table.p_h_down))


# Emission-operator families

@dataclass(frozen=True)
class EmissionFamily:
    family: Optional[str]
    phase: Optional[float] = None


def _support(column: np.ndarray) -> set:
    return {i for i, c in enumerate(column) if abs(c) > CLASSIFY_TOL}


def classify_emission_operator(k) -> EmissionFamily:
    """Match a 4x2 spin -> spin (x) photon operator to S0..S3.

    S0: |0_s 0_ph><0_s| + e^{i phi}|1_s 1_ph><1_s|, S1 the same with the
    photon flipped, S2/S3: any spin map followed by a fixed photon |0>/|1>.
    A common global phase and scale are allowed for S0/S1.
    """
    k = np.asarray(k, dtype=complex)
    if k.shape != (4, 2):
        raise DimensionError(f"emission operator must be 4x2, got {k.shape}")
    col0, col1 = k[:, 0], k[:, 1]
    s0, s1 = _support(col0), _support(col1)
    if not s0 and not s1:
        return EmissionFamily(None)

    for name, (a, b) in (("S0", (0, 3)), ("S1", (1, 2))):
        if s0 == {a} and s1 == {b} and abs(abs(col0[a]) - abs(col1[b])) <= CLASSIFY_TOL:
            phase = float(np.mod(np.angle(col1[b]) - np.angle(col0[a]), 2.0 * np.pi))
            if abs(phase - 2.0 * np.pi) <= CLASSIFY_TOL:
                phase = 0.0
            return EmissionFamily(name, phase)

    support = s0 | s1
    if support <= {0, 2}:
        return EmissionFamily("S2")
    if support <= {1, 3}:
        return EmissionFamily("S3")
    return EmissionFamily(None)


def phase_isometry(phi: float) -> np.ndarray:
    k = np.zeros((4, 2), dtype=complex)
    k[0, 0] = 1.0
    k[3, 1] = np.exp(1j * phi)
    return k


def emit_twice(k, spin_index: int) -> np.ndarray:
    """Two-photon state from applying k twice to a basis spin state, spin traced out"""
    if spin_index not in (0, 1):
        raise ConfigError(f"spin_index must be 0 or 1, got {spin_index}")
    step = sprepost(k, dagger(k))
    spin = np.zeros(2, dtype=complex)
    spin[spin_index] = 1.0
    rho = unvec(step @ vec(projector(spin)))
    rho = apply_on_leading(step, 2, 4, rho)
    return partial_trace(rho, [2, 2, 2], keep=[1, 2])


# Phase-jitter processes

@dataclass
class PhaseJitterProcess:
    """Discrete phase distribution p(phi) for the emission operators K_phi"""
    phases: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        self.phases = np.mod(np.asarray(self.phases, dtype=float).reshape(-1), 2.0 * np.pi)
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        if self.phases.size == 0 or self.phases.shape != self.weights.shape:
            raise ConfigError("phases and weights must be non-empty and of equal length")
        if np.any(self.weights < 0.0):
            raise ConfigError("phase weights must be nonnegative")
        if abs(self.weights.sum() - 1.0) > 1e-9:
            raise ConfigError(f"phase weights sum to {self.weights.sum():.12f}, expected 1")

    @classmethod
    def point(cls, phi: float = 0.0) -> "PhaseJitterProcess":
        return cls(np.array([phi]), np.array([1.0]))

    def kraus_operators(self) -> List[np.ndarray]:
        return [np.sqrt(w) * phase_isometry(phi) for phi, w in zip(self.phases, self.weights)]

    def process_map(self) -> ProcessMap:
        matrix = sum(sprepost(k, dagger(k)) for k in self.kraus_operators())
        return ProcessMap(np.asarray(matrix))

    def fidelity_term(self) -> float:
        """A = sum_k w_k |1 + exp(i phi_k)|^2 / 4"""
        return float(np.sum(self.weights * np.abs(1.0 + np.exp(1j * self.phases)) ** 2) / 4.0)


@dataclass
class BoundCheck:
    a_true: float
    p_v_up: float
    p_h_down: float
    s_x: float
    p_prime: float
    f_sp: float
    f_s2p: float
    f_true: float
    holds: bool


def _conditional(rho: np.ndarray, spin: int, label: str) -> float:
    """P(photon = label | spin) for a spin (x) photon state"""
    spin_ket = np.zeros(2, dtype=complex)
    spin_ket[spin] = 1.0
    pol = polarization(label)
    ortho = pol.orthogonal()
    hit = np.real(np.trace(projector(kron(spin_ket.reshape(-1, 1), pol.jones.reshape(-1, 1))) @ rho))
    miss = np.real(np.trace(projector(kron(spin_ket.reshape(-1, 1), ortho.jones.reshape(-1, 1))) @ rho))
    return float(hit / (hit + miss))


def _bell_states() -> Tuple[np.ndarray, np.ndarray]:
    plus = np.array([_S, 0.0, 0.0, _S], dtype=complex)
    minus = np.array([_S, 0.0, 0.0, -_S], dtype=complex)
    return plus, minus


def verify_bound(process: PhaseJitterProcess, f_sp: float = 1.0) -> BoundCheck:
    """Compare the measurement-derived bounds with the true fidelities of a jitter process.

    The truth tables are simulated with ideal spin control: the process
    acts on |+>, the spin precesses by pi/2 and is read out in z. The
    spin-photon input of the three-partite check has fidelity f_sp with
    the ideal Bell state, the remainder being its phase-flipped partner.
    """
    channel = process.process_map()
    a_true = process.fidelity_term()

    plus_spin = projector(np.array([_S, _S], dtype=complex))
    rotate = kron(rotation_quarter(), np.eye(2))
    measured = rotate @ channel.apply(plus_spin) @ dagger(rotate)
    p_v_up = _conditional(measured, 0, "V")
    p_h_down = _conditional(measured, 1, "H")
    s_x = 1.0 - (p_v_up + p_h_down)
    p_prime = (1.0 - s_x) / 2.0
    bound = f_s2p(f_sp, float(np.clip(s_x, -1.0, 1.0)))

    psi2, psi2_flip = _bell_states()
    psi3 = kron(phase_isometry(0.0), np.eye(2)) @ psi2
    target = projector(psi3)
    rho2 = f_sp * projector(psi2) + (1.0 - f_sp) * projector(psi2_flip)
    # [spin, photon1] -> [spin, photon2, photon1]
    rho3 = apply_on_leading(channel.matrix, 2, 4, rho2)
    f_true = float(np.real(np.trace(target @ rho3)))

    holds = p_prime <= a_true + BOUND_SLACK and bound <= f_true + BOUND_SLACK
    if not holds:
        logger.error(f"Bound violated: P'={p_prime:.6f} A={a_true:.6f} F_s2p={bound:.6f} F={f_true:.6f}")
    return BoundCheck(a_true, p_v_up, p_h_down, s_x, p_prime, f_sp, bound, f_true, holds)


def random_processes(n: int, seed: int, max_points: int = 5) -> List[PhaseJitterProcess]:
    processes = []
    for i in range(n):
        rng = np.random.default_rng([seed, i])
        count = int(rng.integers(1, max_points + 1))
        phases = rng.uniform(0.0, 2.0 * np.pi, size=count)
        weights = rng.dirichlet(np.ones(count))
        processes.append(PhaseJitterProcess(phases, weights / weights.sum()))
    return processes


@dataclass
class VerificationSummary:
    checks: List[BoundCheck] = field(default_factory=list)

    @property
    def all_hold(self) -> bool:
        return all(c.holds for c in self.checks)

    @property
    def failures(self) -> int:
        return sum(1 for c in self.checks if not c.holds)

    def to_dict(self) -> Dict:
        return {
            "n_processes": len(self.checks),
            "failures": self.failures,
            "all_hold": self.all_hold,
            "max_margin_p_prime_minus_a": max((c.p_prime - c.a_true for c in self.checks), default=0.0),
        }


def verify_suite(n: int = 100, seed: int = 7) -> VerificationSummary:
    """Bound check over seeded random jitter processes with random f_sp in [0.5, 1]"""
    summary = VerificationSummary()
    for i, process in enumerate(random_processes(n, seed)):
        f_sp = float(np.random.default_rng([seed, i, 1]).uniform(0.5, 1.0))
        summary.checks.append(verify_bound(process, f_sp))
    logger.info(f"Bound verification: {n - summary.failures}/{n} processes pass")
    return summary


def bound_report(measured: TruthTable, s_x: float, simulated: Optional[TruthTable] = None) -> Dict:
    """Bounds from measured (and optionally simulated) truth tables with the entanglement verdict"""
    spin_photon = blinov_bound(measured)
    f_sp = float(np.clip(spin_photon.value, 0.0, 1.0))
    three = f_s2p(f_sp, s_x)
    report = {
        "f_sp": spin_photon.value,
        "f_sp_stderr": spin_photon.stderr,
        "s_x": s_x,
        "s_x_from_table": s_x_from_table(measured),
        "f_s2p": three,
        "verdict": "entangled" if three > ENTANGLEMENT_THRESHOLD else "not demonstrated",
    }
    if simulated is not None:
        sim = blinov_bound(simulated)
        report["simulated_f_sp"] = sim.value
        report["simulated_f_sp_stderr"] = sim.stderr
    return report
