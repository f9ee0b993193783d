"""Four-level quantum-dot model.

Basis order: |up>, |down>, |T_up>, |T_down> (electron spin ground states,
then the two trion states). Times in ps, fields in mT, energies as angular
frequencies in rad/ps.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from clustersim.exceptions import PolarizationError
from clustersim.schemas import QDParams
from clustersim.services.operator_core import dagger, expm, sprepost

logger = logging.getLogger(__name__)

MU_B_OVER_HBAR = 8.794e-2  # rad ps^-1 T^-1

SPIN_UP, SPIN_DOWN, TRION_UP, TRION_DOWN = 0, 1, 2, 3
DIM = 4

UNIT_TOL = 1e-9


def basis_operator(row: int, col: int) -> np.ndarray:
    """|row><col| on the four-level space"""
    op = np.zeros((DIM, DIM), dtype=complex)
    op[row, col] = 1.0
    return op


def larmor_frequency(g: float, field_mT: float) -> float:
    return g * MU_B_OVER_HBAR * field_mT * 1e-3


def electron_pauli() -> Dict[str, np.ndarray]:
    """Electron spin Pauli operators on the ground manifold (zero on the trion)"""
    sx = basis_operator(SPIN_UP, SPIN_DOWN) + basis_operator(SPIN_DOWN, SPIN_UP)
    sy = 1j * (basis_operator(SPIN_DOWN, SPIN_UP) - basis_operator(SPIN_UP, SPIN_DOWN))
    sz = basis_operator(SPIN_UP, SPIN_UP) - basis_operator(SPIN_DOWN, SPIN_DOWN)
    return {"x": sx, "y": sy, "z": sz}


def hole_pauli_y() -> np.ndarray:
    return 1j * (basis_operator(TRION_DOWN, TRION_UP) - basis_operator(TRION_UP, TRION_DOWN))


def ground_projector() -> np.ndarray:
    return basis_operator(SPIN_UP, SPIN_UP) + basis_operator(SPIN_DOWN, SPIN_DOWN)


def trion_projector() -> np.ndarray:
    return basis_operator(TRION_UP, TRION_UP) + basis_operator(TRION_DOWN, TRION_DOWN)


def embed_spin_state(rho_spin) -> np.ndarray:
    """Place a 2x2 spin density matrix in the ground block of the four-level space"""
    rho = np.zeros((DIM, DIM), dtype=complex)
    rho[:2, :2] = np.asarray(rho_spin, dtype=complex)
    return rho


def spin_hamiltonian(params: QDParams, b_overhauser: Sequence[float] = (0.0, 0.0, 0.0)) -> np.ndarray:
    """Voigt-geometry Hamiltonian with a static Overhauser field on the electron"""
    delta_e = larmor_frequency(params.g_e, params.field_mT)
    delta_h = larmor_frequency(params.g_h, params.field_mT)
    pauli = electron_pauli()

    h = 0.5 * delta_e * pauli["y"] + 0.5 * delta_h * hole_pauli_y()
    bx, by, bz = (float(b) for b in b_overhauser)
    h = h + 0.5 * (
        larmor_frequency(params.g_e, bx) * pauli["x"]
        + larmor_frequency(params.g_e, by) * pauli["y"]
        + larmor_frequency(params.g_e, bz) * pauli["z"]
    )
    # Remove rounding asymmetry so downstream Hermitian checks are exact
    return 0.5 * (h + dagger(h))


def collapse_operators(params: QDParams) -> List[np.ndarray]:
    """Radiative decay operators [A_R, A_L] with rate 1/T1"""
    amplitude = np.sqrt(params.decay_rate)
    return [
        amplitude * basis_operator(SPIN_UP, TRION_UP),
        amplitude * basis_operator(SPIN_DOWN, TRION_DOWN),
    ]


SIGMA_R = basis_operator(SPIN_UP, TRION_UP)
SIGMA_L = basis_operator(SPIN_DOWN, TRION_DOWN)
SIGMA_H = (SIGMA_L + SIGMA_R) / np.sqrt(2.0)
SIGMA_V = -1j * (SIGMA_L - SIGMA_R) / np.sqrt(2.0)


@dataclass(frozen=True)
class PolarizationVector:
    """Unit Jones vector (c_R, c_L) in the circular basis"""
    c_r: complex
    c_l: complex
    label: Optional[str] = None

    def __post_init__(self):
        norm = abs(self.c_r) ** 2 + abs(self.c_l) ** 2
        if abs(norm - 1.0) > UNIT_TOL:
            raise PolarizationError(f"Jones vector norm^2 {norm:.12f} is not 1")

    @classmethod
    def from_label(cls, label: str) -> "PolarizationVector":
        try:
            c_r, c_l = _JONES[label]
        except KeyError:
            raise PolarizationError(f"unknown polarization label '{label}'") from None
        return cls(c_r, c_l, label)

    @classmethod
    def from_angles(cls, theta_p: float, phi_p: float) -> "PolarizationVector":
        """Polarization whose lowering operator is cos(theta) s_H + exp(i phi) sin(theta) s_V"""
        h = np.array(_JONES["H"])
        v = np.array(_JONES["V"])
        jones = np.cos(theta_p) * h + np.exp(-1j * phi_p) * np.sin(theta_p) * v
        return cls(complex(jones[0]), complex(jones[1]))

    @property
    def jones(self) -> np.ndarray:
        return np.array([self.c_r, self.c_l], dtype=complex)

    def rotated(self, angle: float) -> "PolarizationVector":
        """Same polarization seen from axes turned by angle about the propagation direction"""
        if angle == 0.0:
            return self
        return PolarizationVector(self.c_r * np.exp(-1j * angle), self.c_l * np.exp(1j * angle))

    def orthogonal(self) -> "PolarizationVector":
        label = ORTHOGONAL_LABEL.get(self.label) if self.label else None
        if label:
            return PolarizationVector.from_label(label)
        return PolarizationVector(-np.conj(self.c_l), np.conj(self.c_r))

    def key(self) -> Tuple[float, float, float, float]:
        return (
            round(self.c_r.real, 12), round(self.c_r.imag, 12),
            round(self.c_l.real, 12), round(self.c_l.imag, 12),
        )


_S = 1.0 / np.sqrt(2.0)
_JONES = {
    "R": (1.0 + 0j, 0j),
    "L": (0j, 1.0 + 0j),
    "H": (_S + 0j, _S + 0j),
    "V": (-1j * _S, 1j * _S),
    "D": (0.5 * (1 - 1j), 0.5 * (1 + 1j)),
    "A": (0.5 * (1 + 1j), 0.5 * (1 - 1j)),
}
POLARIZATION_LABELS = ("R", "L", "H", "V", "D", "A")
ORTHOGONAL_LABEL = {"R": "L", "L": "R", "H": "V", "V": "H", "D": "A", "A": "D"}


def polarization(label: str) -> PolarizationVector:
    return PolarizationVector.from_label(label)


def polarization_lowering(pol: PolarizationVector) -> np.ndarray:
    """Lowering operator of the emitted field projected on polarization pol"""
    return np.conj(pol.c_r) * SIGMA_R + np.conj(pol.c_l) * SIGMA_L


def detection_frame_angle(params: QDParams) -> float:
    """Angle between the linear detection axes and the dot axes.

    R_theta leaves exp(-i theta) on |T_up> and exp(+i theta) on |T_down>. Axes
    aligned with the excitation polarization carry the same phases, so H there
    is the pulse polarization itself.
    """
    return params.theta if params.detection_frame == "excitation" else 0.0


def pulse_operator(theta: float, normalized: bool = False) -> np.ndarray:
    """Instantaneous linearly polarized pi-pulse unitary R_theta"""
    sigma_y_h = -1j * (SIGMA_H - dagger(SIGMA_H))
    sigma_y_v = -1j * (SIGMA_V - dagger(SIGMA_V))
    generator = np.cos(theta) * sigma_y_h + np.sin(theta) * sigma_y_v
    prefactor = np.pi / 2.0
    if normalized:
        prefactor *= np.sqrt(2.0)
    return expm(-1j * prefactor * generator)


def pulse_superoperator(theta: float, normalized: bool = False) -> np.ndarray:
    r = pulse_operator(theta, normalized)
    return sprepost(r, dagger(r))
