"""Liouvillian, polarization-resolved jump superoperators and the
photon-number decomposition of the propagator.

K(t) = exp(L t) is the full propagator, K0_p(t) = exp((L - J_p) t) the
evolution with no detected p-photon, and B_p(t) = K(t) - K0_p(t) the bright
propagator giving the unnormalized state conditioned on a p-click.
"""

import logging
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np

from clustersim.exceptions import NonHermitianError, SequenceError
from clustersim.schemas import QDParams
from clustersim.services.operator_core import (
    HERMITIAN_TOL, as_matrix, dagger, expm, is_hermitian, spost, spre, sprepost, trace_row, vec,
)
from clustersim.services.qd_model import (
    POLARIZATION_LABELS, PolarizationVector, collapse_operators, detection_frame_angle, polarization,
    polarization_lowering, pulse_superoperator, spin_hamiltonian,
)

logger = logging.getLogger(__name__)


def lindblad_dissipator(a) -> np.ndarray:
    a = as_matrix(a)
    ada = dagger(a) @ a
    return sprepost(a, dagger(a)) - 0.5 * spre(ada) - 0.5 * spost(ada)


def liouvillian(hamiltonian, collapse: Iterable) -> np.ndarray:
    h = as_matrix(hamiltonian)
    if not is_hermitian(h, HERMITIAN_TOL):
        raise NonHermitianError("Hamiltonian is not Hermitian")
    generator = -1j * (spre(h) - spost(h))
    for a in collapse:
        generator = generator + lindblad_dissipator(a)
    return generator


def jump_superoperator(pol: PolarizationVector, eta: float, t1_ps: float) -> np.ndarray:
    """J_p rho = eta * gamma * s_p rho s_p^dagger"""
    s = polarization_lowering(pol)
    return (eta / t1_ps) * sprepost(s, dagger(s))


def propagate(generator, t: float) -> np.ndarray:
    if t < 0:
        raise SequenceError(f"cannot propagate over negative time {t}")
    return expm(as_matrix(generator) * t)


def bright_propagator(generator, jump, t: float) -> np.ndarray:
    generator = as_matrix(generator)
    return propagate(generator, t) - propagate(generator - as_matrix(jump), t)


class Propagators:
    """Full, no-click and bright propagators for one Overhauser configuration.

    Results are cached per (polarization, time); an instance belongs to one
    Monte-Carlo sample and is not shared between threads while filling.
    Detected polarizations are read in axes turned by frame_angle.
    """

    def __init__(self, generator, t1_ps: float, eta: float = 1.0, frame_angle: float = 0.0):
        self.generator = as_matrix(generator)
        self.t1_ps = t1_ps
        self.eta = eta
        self.frame_angle = frame_angle
        self._jumps: Dict[tuple, np.ndarray] = {}
        self._full: Dict[float, np.ndarray] = {}
        self._no_click: Dict[Tuple[tuple, float], np.ndarray] = {}

    @classmethod
    def for_sample(cls, params: QDParams, b_overhauser: Sequence[float] = (0.0, 0.0, 0.0),
                   eta: Optional[float] = None) -> "Propagators":
        h = spin_hamiltonian(params, b_overhauser)
        generator = liouvillian(h, collapse_operators(params))
        return cls(generator, params.t1_ps, params.eta if eta is None else eta, detection_frame_angle(params))

    def jump(self, pol: PolarizationVector) -> np.ndarray:
        key = pol.key()
        if key not in self._jumps:
            self._jumps[key] = jump_superoperator(pol.rotated(self.frame_angle), self.eta, self.t1_ps)
        return self._jumps[key]

    def full(self, t: float) -> np.ndarray:
        t = float(t)
        if t not in self._full:
            self._full[t] = propagate(self.generator, t)
        return self._full[t]

    def no_click(self, pol: PolarizationVector, t: float) -> np.ndarray:
        key = (pol.key(), float(t))
        if key not in self._no_click:
            self._no_click[key] = propagate(self.generator - self.jump(pol), t)
        return self._no_click[key]

    def bright(self, pol: PolarizationVector, t: float) -> np.ndarray:
        return self.full(t) - self.no_click(pol, t)


def final_window_ps(t1_ps: float) -> float:
    """Length used for the t -> infinity limit of the last emission window"""
    return max(6000.0, 30.0 * t1_ps)


def _random_state(rng: np.random.Generator, dim: int) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = g @ dagger(g)
    return rho / np.trace(rho)


def invariant_residuals(params: QDParams, n_states: int = 100, seed: int = 0,
                        t: Optional[float] = None) -> Dict[str, float]:
    """Largest violation of the propagator identities over random states.

    trace: Tr K(t) rho = Tr rho
    completeness: B_p + K0_p = K for every labelled polarization
    basis_sum: J_H + J_V = J_D + J_A = J_R + J_L
    efficiency: B_p(eta) rho / eta equals B_p(1) rho after a pulse
    """
    t = params.t12_ps if t is None else t
    rng = np.random.default_rng(seed)
    props = Propagators.for_sample(params)
    lossy = Propagators.for_sample(params, eta=0.37)
    ideal = Propagators.for_sample(params, eta=1.0)
    pulse = pulse_superoperator(params.theta, params.normalized_pulse)
    row = trace_row(4)
    residuals = {"trace": 0.0, "completeness": 0.0, "basis_sum": 0.0, "efficiency": 0.0}

    reference = props.jump(polarization("R")) + props.jump(polarization("L"))
    for a, b in (("H", "V"), ("D", "A")):
        total = props.jump(polarization(a)) + props.jump(polarization(b))
        residuals["basis_sum"] = max(residuals["basis_sum"], float(np.max(np.abs(total - reference))))

    for _ in range(n_states):
        v = vec(_random_state(rng, 4))
        full = props.full(t) @ v
        residuals["trace"] = max(residuals["trace"], abs(complex(row @ full) - complex(row @ v)))
        for label in POLARIZATION_LABELS:
            pol = polarization(label)
            split = props.bright(pol, t) @ v + props.no_click(pol, t) @ v
            residuals["completeness"] = max(residuals["completeness"], float(np.max(np.abs(split - full))))
        excited = pulse @ v
        for label in ("H", "R"):
            pol = polarization(label)
            scaled = lossy.bright(pol, t) @ excited / 0.37
            residuals["efficiency"] = max(
                residuals["efficiency"], float(np.max(np.abs(scaled - ideal.bright(pol, t) @ excited)))
            )
    return residuals
