"""One-step emission process map, its two-qubit form and k-step cluster fidelities.

The spin qubit is the ground manifold (|up> = |0>), the photon qubit the
circular basis (|R> = |0>). A map C acts on column-stacked 2x2 spin
operators and returns column-stacked 4x4 spin (x) photon operators.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from clustersim.exceptions import ChainLengthError, ConvergenceError, SingularSystemError, NumericalError
from clustersim.schemas import MonteCarloConfig, QDParams
from clustersim.services.dynamics import Propagators
from clustersim.services.experiment import HERALD, mixed_spin_state
from clustersim.services.operator_core import (
    PAULI, PAULI_LABELS, apply_on_leading, dagger, expm, kron, overlap_fidelity,
    permute_subsystems, projector, sprepost, unvec, vec,
)
from clustersim.services.overhauser import MonteCarloService, OverhauserSample
from clustersim.services.qd_model import (
    POLARIZATION_LABELS, embed_spin_state, electron_pauli, polarization, pulse_superoperator,
    trion_projector,
)

logger = logging.getLogger(__name__)

MAX_CHAIN = 4
RESIDUAL_TOL = 1e-8

_S = 1.0 / np.sqrt(2.0)
SPIN_KETS = {
    "down": np.array([0.0, 1.0], dtype=complex),
    "up": np.array([1.0, 0.0], dtype=complex),
    "plus": np.array([_S, _S], dtype=complex),
    "plus_i": np.array([_S, 1j * _S], dtype=complex),
}
SPIN_INPUTS = ("down", "up", "plus", "plus_i")

# Detected polarization pairs realising each photon Pauli operator
PHOTON_PAIRS = {"I": ("R", "L"), "x": ("H", "V"), "y": ("D", "A"), "z": ("R", "L")}

KET_R = np.array([1.0, 0.0], dtype=complex)


def _electron_operators() -> List[np.ndarray]:
    pauli = electron_pauli()
    return [np.eye(4, dtype=complex), pauli["x"], pauli["y"], pauli["z"]]


def _photon_weight(label: str, pauli_label: str) -> float:
    """Eigenvalue <p|sigma_j|p> of a detected polarization"""
    jones = polarization(label).jones
    return float(np.real(np.conj(jones) @ PAULI[pauli_label] @ jones))


def rotation_quarter() -> np.ndarray:
    """Ideal pi/2 spin precession, same sense as the Voigt-field Hamiltonian"""
    return expm(-0.25j * np.pi * PAULI["y"])


@dataclass(frozen=True)
class ProcessMap:
    matrix: np.ndarray  # 16 x 4
    condition_time_ps: Optional[float] = None

    def apply(self, rho_spin) -> np.ndarray:
        return unvec(self.matrix @ vec(rho_spin))

    def choi(self) -> np.ndarray:
        blocks = np.zeros((8, 8), dtype=complex)
        for a in range(2):
            for b in range(2):
                unit = np.zeros((2, 2), dtype=complex)
                unit[a, b] = 1.0
                blocks += kron(unit, self.apply(unit))
        return blocks

    def min_choi_eigenvalue(self) -> float:
        choi = self.choi()
        return float(np.min(np.linalg.eigvalsh(0.5 * (choi + dagger(choi)))))

    def hermiticity_residual(self, n_states: int = 100, seed: int = 0) -> float:
        rng = np.random.default_rng(seed)
        worst = 0.0
        for _ in range(n_states):
            rho = _random_operator(rng, 2)
            lhs = self.apply(dagger(rho))
            rhs = dagger(self.apply(rho))
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst


@dataclass(frozen=True)
class TwoQubitMap:
    matrix: np.ndarray  # 16 x 16

    def apply(self, rho) -> np.ndarray:
        return unvec(self.matrix @ vec(rho))


def _random_operator(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))


def random_density_matrix(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = _random_operator(rng, dim)
    rho = g @ dagger(g)
    return rho / np.trace(rho)


def correlations_from_moments(moments: np.ndarray) -> np.ndarray:
    """4x4 table <sigma_i^(e) sigma_j^(p)> from moments[p, i] = Tr[sigma_i rho_p].

    moments rows follow POLARIZATION_LABELS, columns the electron operators I, x, y, z.
    """
    moments = np.asarray(moments, dtype=float)
    correlations = np.zeros((4, 4))
    for j, photon_label in enumerate(PAULI_LABELS):
        first, second = PHOTON_PAIRS[photon_label]
        a, b = POLARIZATION_LABELS.index(first), POLARIZATION_LABELS.index(second)
        wa, wb = _photon_weight(first, photon_label), _photon_weight(second, photon_label)
        denominator = moments[a, 0] + moments[b, 0]
        if denominator <= 0.0:
            raise ConvergenceError("no photon emitted in the conditioning window")
        correlations[:, j] = (wa * moments[a, :] + wb * moments[b, :]) / denominator
    return correlations


def state_from_correlations(correlations: np.ndarray) -> np.ndarray:
    rho = np.zeros((4, 4), dtype=complex)
    for i, si in enumerate(PAULI_LABELS):
        for j, sj in enumerate(PAULI_LABELS):
            rho += correlations[i, j] * kron(PAULI[si], PAULI[sj])
    return 0.25 * rho


def correlations_from_state(rho) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    return np.array([
        [np.real(np.trace(kron(PAULI[si], PAULI[sj]) @ rho)) for sj in PAULI_LABELS]
        for si in PAULI_LABELS
    ])


def process_map_from_correlations(correlations: Dict[str, np.ndarray],
                                  condition_time_ps: Optional[float] = None) -> ProcessMap:
    """Unique linear map reproducing the correlation tables of the four input states"""
    missing = [name for name in SPIN_INPUTS if name not in correlations]
    if missing:
        raise SingularSystemError(f"correlations missing for input states {missing}")
    inputs = np.column_stack([vec(projector(SPIN_KETS[name])) for name in SPIN_INPUTS])
    outputs = np.column_stack([vec(state_from_correlations(correlations[name])) for name in SPIN_INPUTS])
    if np.linalg.cond(inputs) > 1e12:
        raise SingularSystemError("input states do not span the spin operator space")
    matrix = np.linalg.solve(inputs.T, outputs.T).T
    residual = float(np.max(np.abs(matrix @ inputs - outputs)))
    if residual > RESIDUAL_TOL:
        raise SingularSystemError(f"process map residual {residual:.2e} above {RESIDUAL_TOL}")
    return ProcessMap(matrix, condition_time_ps)


def ideal_step_map() -> ProcessMap:
    """K0 = |0_s 0_ph><0_s| + |1_s 1_ph><1_s| followed by a pi/2 spin precession"""
    isometry = np.zeros((4, 2), dtype=complex)
    isometry[0, 0] = 1.0
    isometry[3, 1] = 1.0
    step = kron(rotation_quarter(), np.eye(2)) @ isometry
    return ProcessMap(sprepost(step, dagger(step)))


def to_two_qubit(c: ProcessMap) -> TwoQubitMap:
    """D(rho_s (x) X) = C(rho_s) <R|X|R>, zero on the other photon inputs"""
    project = kron(np.eye(2), KET_R.reshape(1, 2))
    return TwoQubitMap(c.matrix @ sprepost(project, dagger(project)))


def _check_chain_length(k: int):
    if not 1 <= k <= MAX_CHAIN:
        raise ChainLengthError(f"chain length k={k} outside 1..{MAX_CHAIN}")


def compose(c: ProcessMap, k: int, initial_spin) -> np.ndarray:
    """Spin (x) photon_1 ... photon_k state from k applications of C (x) I"""
    _check_chain_length(k)
    rho = np.asarray(initial_spin, dtype=complex)
    n_photons = 0
    for _ in range(k):
        out = apply_on_leading(c.matrix, 2, 4, rho)
        dims = [2] * (n_photons + 2)
        # [spin, new, old...] -> [spin, old..., new]
        order = [0] + list(range(2, n_photons + 2)) + [1]
        rho = permute_subsystems(out, dims, order)
        n_photons += 1
    return rho


def compose_two_qubit(d: TwoQubitMap, k: int, initial_spin) -> np.ndarray:
    """Same chain built by feeding a fresh |R> photon into D at every step"""
    _check_chain_length(k)
    rho = np.asarray(initial_spin, dtype=complex)
    fresh = projector(KET_R)
    n_photons = 0
    for _ in range(k):
        rho = kron(rho, fresh)
        dims = [2] * (n_photons + 2)
        # [spin, old..., new] -> [spin, new, old...]
        forward = [0, n_photons + 1] + list(range(1, n_photons + 1))
        rho = permute_subsystems(rho, dims, forward)
        rho = apply_on_leading(d.matrix, 4, 4, rho)
        backward = [0] + list(range(2, n_photons + 2)) + [1]
        rho = permute_subsystems(rho, dims, backward)
        n_photons += 1
    return rho


def ideal_initial_spin() -> np.ndarray:
    return projector(SPIN_KETS["plus"])


def normalized_spin(rho) -> np.ndarray:
    trace = float(np.real(np.trace(rho)))
    if trace <= 0.0:
        raise ConvergenceError("no herald click before the second pulse")
    return np.asarray(rho, dtype=complex) / trace


def ideal_chain(k: int) -> np.ndarray:
    return compose(ideal_step_map(), k, ideal_initial_spin())


def compose_and_fidelity(c: ProcessMap, k: int, initial_spin=None) -> Tuple[np.ndarray, float]:
    """k-step chain from C and its overlap with the ideal cluster state"""
    rho_s = ideal_initial_spin() if initial_spin is None else initial_spin
    rho_k = compose(c, k, rho_s)
    return rho_k, overlap_fidelity(ideal_chain(k), rho_k)


@dataclass
class FidelityReport:
    fidelities: List[float]
    stderr: List[float]
    traces: List[float]
    average_mode: str
    n_samples: int
    min_choi_eigenvalue: Optional[float] = None
    process: Optional[ProcessMap] = None


class ProcessMapService:
    """Extracts the emission map from simulated spin-photon correlations"""

    def __init__(self, params: QDParams, mc: MonteCarloConfig,
                 monte_carlo: Optional[MonteCarloService] = None,
                 convergence_tolerance: float = 0.05):
        self.params = params
        self.mc = mc
        self.monte_carlo = monte_carlo or MonteCarloService()
        self.convergence_tolerance = convergence_tolerance
        self.pulse = pulse_superoperator(params.theta, params.normalized_pulse)
        self._electron_ops = _electron_operators()
        self._trion = trion_projector()

    def condition_time(self, t: Optional[float] = None) -> float:
        return self.params.t12_ps if t is None else float(t)

    def sample_moments(self, sample: OverhauserSample, t: float,
                       inputs: Sequence[str] = SPIN_INPUTS) -> np.ndarray:
        """moments[input, polarization, operator] = Tr[sigma_i rho_p] for one sample"""
        props = Propagators.for_sample(self.params, sample.b_o)
        out = np.empty((len(inputs), len(POLARIZATION_LABELS), 4))
        for n, name in enumerate(inputs):
            excited = self.pulse @ vec(embed_spin_state(projector(SPIN_KETS[name])))
            remaining = float(np.real(np.trace(self._trion @ unvec(props.full(t) @ excited))))
            if remaining > self.convergence_tolerance:
                raise ConvergenceError(
                    f"trion population {remaining:.3f} left after {t:.0f} ps (input {name})"
                )
            for m, label in enumerate(POLARIZATION_LABELS):
                rho_p = unvec(props.bright(polarization(label), t) @ excited)
                out[n, m, :] = [np.real(np.trace(op @ rho_p)) for op in self._electron_ops]
        return out

    def sample_initial_spin(self, sample: OverhauserSample) -> np.ndarray:
        """Unnormalized spin at the second pulse, heralded by an R click from a mixed spin.

        Includes the emission-time jitter and the trion precession of the herald.
        """
        props = Propagators.for_sample(self.params, sample.b_o)
        start = self.pulse @ vec(mixed_spin_state())
        rho = unvec(props.bright(polarization(HERALD), self.params.t12_ps) @ start)
        return rho[:2, :2]

    def spin_photon_correlations(self, initial_spin: str, t: Optional[float] = None) -> np.ndarray:
        if initial_spin not in SPIN_KETS:
            raise SingularSystemError(f"unknown initial spin state '{initial_spin}'")
        t = self.condition_time(t)
        estimate = self.monte_carlo.average(
            self.mc, self.params.sigma_o_mT, lambda s: self.sample_moments(s, t, (initial_spin,))
        )
        return correlations_from_moments(estimate.mean[0])

    @staticmethod
    def _map_from_moments(moments: np.ndarray, t: float) -> ProcessMap:
        tables = {name: correlations_from_moments(moments[n]) for n, name in enumerate(SPIN_INPUTS)}
        return process_map_from_correlations(tables, t)

    def build_process_map(self, t: Optional[float] = None) -> ProcessMap:
        t = self.condition_time(t)
        estimate = self.monte_carlo.average(
            self.mc, self.params.sigma_o_mT, lambda s: self.sample_moments(s, t)
        )
        process = self._map_from_moments(estimate.mean, t)
        min_eig = process.min_choi_eigenvalue()
        if min_eig < -1e-6:
            logger.warning(f"Extracted map is not completely positive (min Choi eigenvalue {min_eig:.2e})")
        return process

    def _sample_payload(self, sample: OverhauserSample, t: float) -> np.ndarray:
        moments = self.sample_moments(sample, t).reshape(-1)
        spin = self.sample_initial_spin(sample).reshape(-1)
        return np.concatenate([moments.astype(complex), spin])

    def fidelities(self, k_max: int = MAX_CHAIN, average_mode: str = "before",
                   t: Optional[float] = None, batches: int = 10) -> FidelityReport:
        _check_chain_length(k_max)
        if average_mode not in ("before", "after"):
            raise NumericalError(f"unknown averaging mode '{average_mode}'")
        t = self.condition_time(t)
        n_moments = len(SPIN_INPUTS) * len(POLARIZATION_LABELS) * 4
        stack = self.monte_carlo.evaluate(
            self.mc, self.params.sigma_o_mT, lambda s: self._sample_payload(s, t)
        )
        moments = np.real(stack[:, :n_moments]).reshape(-1, len(SPIN_INPUTS), len(POLARIZATION_LABELS), 4)
        spins = stack[:, n_moments:].reshape(-1, 2, 2)
        n = stack.shape[0]
        logger.info(f"Composing cluster chains up to k={k_max} from {n} sample(s), averaging {average_mode}")

        if average_mode == "before":
            process = self._map_from_moments(moments.mean(axis=0), t)
            rho_s = normalized_spin(spins.mean(axis=0))
            fids, traces = [], []
            for k in range(1, k_max + 1):
                rho_k, f_k = compose_and_fidelity(process, k, rho_s)
                fids.append(f_k)
                traces.append(float(np.real(np.trace(rho_k))))
            errors = self._batch_errors(moments, spins, k_max, t, batches)
            return FidelityReport(fids, errors, traces, average_mode, n, process.min_choi_eigenvalue(), process)

        per_sample = np.zeros((n, k_max))
        fids, traces = [], []
        chains = [None] * k_max
        for s in range(n):
            process = self._map_from_moments(moments[s], t)
            for k in range(1, k_max + 1):
                rho_k = compose(process, k, normalized_spin(spins[s]))
                per_sample[s, k - 1] = overlap_fidelity(ideal_chain(k), rho_k)
                chains[k - 1] = rho_k if chains[k - 1] is None else chains[k - 1] + rho_k
        for k in range(1, k_max + 1):
            rho_k = chains[k - 1] / n
            fids.append(overlap_fidelity(ideal_chain(k), rho_k))
            traces.append(float(np.real(np.trace(rho_k))))
        errors = MonteCarloService.reduce(per_sample).stderr
        averaged = self._map_from_moments(moments.mean(axis=0), t)
        return FidelityReport(fids, [float(e) for e in errors], traces, average_mode, n,
                              averaged.min_choi_eigenvalue(), averaged)

    def _batch_errors(self, moments: np.ndarray, spins: np.ndarray, k_max: int,
                      t: float, batches: int) -> List[float]:
        n = moments.shape[0]
        batches = min(batches, n)
        if batches < 2:
            return [0.0] * k_max
        values = np.zeros((batches, k_max))
        for b, idx in enumerate(np.array_split(np.arange(n), batches)):
            process = self._map_from_moments(moments[idx].mean(axis=0), t)
            rho_s = normalized_spin(spins[idx].mean(axis=0))
            for k in range(1, k_max + 1):
                values[b, k - 1] = compose_and_fidelity(process, k, rho_s)[1]
        return [float(e) for e in MonteCarloService.reduce(values).stderr]

    def scan_condition_time(self, times: Sequence[float]) -> List[Tuple[float, float]]:
        """One-step fidelity F_1 against the map condition time"""
        scan = []
        for t in times:
            report = self.with_condition(t).fidelities(k_max=1)
            scan.append((float(t), report.fidelities[0]))
        return scan

    def with_condition(self, t: float) -> "ProcessMapService":
        params = self.params.with_updates(t12_ps=float(t))
        return ProcessMapService(params, self.mc, self.monte_carlo, self.convergence_tolerance)
