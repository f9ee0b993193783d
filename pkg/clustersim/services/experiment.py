"""Three-pulse correlation experiment.

Photon #1 heralds the spin (detected in R), photon #2 is analysed in
H/V, D/A or R/L after a delay t23, and photon #3 reads the spin out in
R/L. All curves are built from Overhauser-averaged unnormalized
probabilities; ratios are formed after averaging.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from clustersim.exceptions import SequenceError
from clustersim.schemas import MonteCarloConfig, QDParams, TruthTable
from clustersim.services.dynamics import Propagators, final_window_ps
from clustersim.services.operator_core import trace_row, unvec, vec
from clustersim.services.overhauser import MonteCarloService, OverhauserSample
from clustersim.services.qd_model import (
    DIM, ORTHOGONAL_LABEL, PolarizationVector, embed_spin_state, polarization, pulse_superoperator,
)

logger = logging.getLogger(__name__)

HERALD = "R"
PHOTON2_LABELS = ("H", "V", "D", "A", "R", "L")
PHOTON3_LABELS = ("R", "L")
STOKES_AXES = (("x", "H"), ("y", "D"), ("z", "R"))

PolarizationLike = Union[str, PolarizationVector]


def _as_polarization(p: PolarizationLike) -> PolarizationVector:
    return p if isinstance(p, PolarizationVector) else polarization(p)


def mixed_spin_state() -> np.ndarray:
    return embed_spin_state(0.5 * np.eye(2))


@dataclass(frozen=True)
class PulseSequence:
    t12_ps: float
    t23_ps: float
    theta: float
    rep_period_ps: float
    t1_ps: float
    start_ps: float = 0.0

    def __post_init__(self):
        if self.t12_ps <= 0 or self.t23_ps <= 0:
            raise SequenceError(f"pulse delays must be positive (t12={self.t12_ps}, t23={self.t23_ps})")
        if self.start_ps < 0:
            raise SequenceError("first pulse time must be non-negative")
        if self.start_ps + self.t12_ps + self.t23_ps >= self.rep_period_ps:
            raise SequenceError(
                f"pulses at {self.pulse_times} do not fit in the {self.rep_period_ps:.0f} ps period"
            )

    @classmethod
    def from_params(cls, params: QDParams, t23_ps: Optional[float] = None,
                    start_ps: float = 0.0) -> "PulseSequence":
        return cls(
            t12_ps=params.t12_ps,
            t23_ps=params.t23_ps if t23_ps is None else float(t23_ps),
            theta=params.theta,
            rep_period_ps=params.rep_period_ps,
            t1_ps=params.t1_ps,
            start_ps=start_ps,
        )

    @property
    def pulse_times(self) -> Tuple[float, float, float]:
        t2 = self.start_ps + self.t12_ps
        return (self.start_ps, t2, t2 + self.t23_ps)

    @property
    def final_window_ps(self) -> float:
        return final_window_ps(self.t1_ps)

    @property
    def windows(self) -> Tuple[float, float, float]:
        return (self.t12_ps, self.t23_ps, self.final_window_ps)


@dataclass(frozen=True)
class ConditionalRatio:
    """a / (a + b) with propagated error; value is None when a + b = 0"""
    value: Optional[float]
    stderr: Optional[float]

    @property
    def defined(self) -> bool:
        return self.value is not None

    @classmethod
    def from_counts(cls, a: float, b: float, sa: float = 0.0, sb: float = 0.0) -> "ConditionalRatio":
        total = a + b
        if total <= 0.0:
            return cls(None, None)
        value = a / total
        stderr = float(np.hypot(b * sa, a * sb) / total ** 2)
        return cls(float(value), stderr)


@dataclass
class CoincidenceTable:
    """Three-fold coincidence probabilities P_{p1 p2 p3} at one t23"""
    t23_ps: float
    probabilities: Dict[Tuple[str, str, str], float]
    stderr: Dict[Tuple[str, str, str], float] = field(default_factory=dict)

    @property
    def settings(self) -> List[Tuple[str, str, str]]:
        return list(self.probabilities)

    def ratio(self, p2: str, p3: str, p1: str = HERALD) -> ConditionalRatio:
        a_key, b_key = (p1, p2, p3), (p1, ORTHOGONAL_LABEL[p2], p3)
        if a_key not in self.probabilities or b_key not in self.probabilities:
            return ConditionalRatio(None, None)
        return ConditionalRatio.from_counts(
            self.probabilities[a_key], self.probabilities[b_key],
            self.stderr.get(a_key, 0.0), self.stderr.get(b_key, 0.0),
        )


def conditional_probabilities(table: CoincidenceTable) -> Dict[str, ConditionalRatio]:
    """Named ratios P(X2|Y3) for every analysed photon-2 basis present in the table"""
    ratios = {}
    for p2 in ("R", "H", "D"):
        for p3 in PHOTON3_LABELS:
            ratio = table.ratio(p2, p3)
            key_present = (HERALD, p2, p3) in table.probabilities
            if key_present:
                ratios[f"P({p2}2|{p3}3)"] = ratio
    return ratios


@dataclass
class CorrelationCurves:
    """Averaged P_{R p2 p3} on a t23 grid; arrays indexed [t23, p2, p3]"""
    t23_ps: np.ndarray
    mean: np.ndarray
    stderr: np.ndarray

    def table(self, index: int) -> CoincidenceTable:
        probabilities, errors = {}, {}
        for j, p2 in enumerate(PHOTON2_LABELS):
            for k, p3 in enumerate(PHOTON3_LABELS):
                probabilities[(HERALD, p2, p3)] = float(self.mean[index, j, k])
                errors[(HERALD, p2, p3)] = float(self.stderr[index, j, k])
        return CoincidenceTable(float(self.t23_ps[index]), probabilities, errors)

    def ratio(self, p2: str, p3: str) -> List[ConditionalRatio]:
        j = PHOTON2_LABELS.index(p2)
        jo = PHOTON2_LABELS.index(ORTHOGONAL_LABEL[p2])
        k = PHOTON3_LABELS.index(p3)
        return [
            ConditionalRatio.from_counts(
                self.mean[i, j, k], self.mean[i, jo, k], self.stderr[i, j, k], self.stderr[i, jo, k]
            )
            for i in range(len(self.t23_ps))
        ]

    def bloch_vectors(self, p3: str) -> Tuple[np.ndarray, np.ndarray]:
        """Stokes vectors (s_x, s_y, s_z) of photon #2 and their errors; NaN where undefined"""
        vectors = np.full((len(self.t23_ps), 3), np.nan)
        errors = np.full((len(self.t23_ps), 3), np.nan)
        for axis, (_, label) in enumerate(STOKES_AXES):
            for i, ratio in enumerate(self.ratio(label, p3)):
                if ratio.defined:
                    vectors[i, axis] = 2.0 * ratio.value - 1.0
                    errors[i, axis] = 2.0 * ratio.stderr
        return vectors, errors

    def to_frame(self) -> pd.DataFrame:
        rows = []
        for p3 in PHOTON3_LABELS:
            for p2 in ("R", "H", "D"):
                for t, ratio in zip(self.t23_ps, self.ratio(p2, p3)):
                    if ratio.defined:
                        rows.append((float(t), f"P({p2}2|{p3}3)", ratio.value, ratio.stderr))
            vectors, errors = self.bloch_vectors(p3)
            for axis, (name, _) in enumerate(STOKES_AXES):
                for t, value, err in zip(self.t23_ps, vectors[:, axis], errors[:, axis]):
                    if np.isfinite(value):
                        rows.append((float(t), f"s{name}|{p3}3", float(value), float(err)))
            norms = np.linalg.norm(vectors, axis=1)
            for t, value in zip(self.t23_ps, norms):
                if np.isfinite(value):
                    rows.append((float(t), f"norm|{p3}3", float(value), 0.0))
        dropped = 3 * len(PHOTON3_LABELS) * len(self.t23_ps) - sum(1 for r in rows if r[1].startswith("P("))
        if dropped:
            logger.warning(f"{dropped} conditional ratios undefined (zero coincidence probability)")
        return pd.DataFrame(rows, columns=["t23_ps", "quantity", "value", "stderr"])


class CorrelationExperiment:
    """Simulates the three-pulse protocol for one parameter set"""

    def __init__(self, params: QDParams, mc: MonteCarloConfig,
                 monte_carlo: Optional[MonteCarloService] = None):
        self.params = params
        self.mc = mc
        self.monte_carlo = monte_carlo or MonteCarloService()
        self.pulse = pulse_superoperator(params.theta, params.normalized_pulse)
        self.rho0 = vec(mixed_spin_state())
        self.trace = trace_row(DIM)

    def propagators(self, sample: OverhauserSample) -> Propagators:
        return Propagators.for_sample(self.params, sample.b_o)

    def three_pulse_conditional(self, sample: OverhauserSample, p1: PolarizationLike,
                                p2: PolarizationLike, p3: PolarizationLike,
                                t23_ps: Optional[float] = None) -> Tuple[np.ndarray, float]:
        """Unnormalized dot state after detecting p1, p2, p3 and its probability"""
        sequence = PulseSequence.from_params(self.params, t23_ps)
        props = self.propagators(sample)
        state = self.rho0
        for label, window in zip((p1, p2, p3), sequence.windows):
            state = props.bright(_as_polarization(label), window) @ (self.pulse @ state)
        rho = unvec(state)
        return rho, float(np.real(np.trace(rho)))

    def _check_grid(self, t23_grid: Sequence[float]) -> np.ndarray:
        grid = np.asarray(t23_grid, dtype=float).reshape(-1)
        if grid.size == 0:
            raise SequenceError("t23 grid is empty")
        if np.any(grid <= 0):
            raise SequenceError("t23 grid must be strictly positive")
        PulseSequence.from_params(self.params, float(np.max(grid)))
        return grid

    def sample_grid(self, sample: OverhauserSample, t23_grid: Sequence[float]) -> np.ndarray:
        """Unnormalized P_{R p2 p3} for one sample, shape (len(grid), 6, 2)"""
        grid = np.asarray(t23_grid, dtype=float)
        props = self.propagators(sample)
        heralded = props.bright(polarization(HERALD), self.params.t12_ps) @ (self.pulse @ self.rho0)
        excited = self.pulse @ heralded
        readout = {
            p3: self.trace @ props.bright(polarization(p3), final_window_ps(self.params.t1_ps)) @ self.pulse
            for p3 in PHOTON3_LABELS
        }
        out = np.empty((grid.size, len(PHOTON2_LABELS), len(PHOTON3_LABELS)))
        for i, t23 in enumerate(grid):
            evolved = props.full(t23) @ excited
            for j, p2 in enumerate(PHOTON2_LABELS):
                state = evolved - props.no_click(polarization(p2), t23) @ excited
                for k, p3 in enumerate(PHOTON3_LABELS):
                    out[i, j, k] = np.real(readout[p3] @ state)
        return out

    def curves(self, t23_grid: Sequence[float]) -> CorrelationCurves:
        grid = self._check_grid(t23_grid)
        logger.info(f"Simulating correlation curves on {grid.size} delays")
        estimate = self.monte_carlo.average(
            self.mc, self.params.sigma_o_mT, lambda sample: self.sample_grid(sample, grid)
        )
        return CorrelationCurves(grid, estimate.mean, estimate.stderr)

    def coincidence_table(self, t23_ps: Optional[float] = None) -> CoincidenceTable:
        t23 = self.params.t23_ps if t23_ps is None else t23_ps
        return self.curves([t23]).table(0)

    def photon2_bloch_vector(self, t23_grid: Sequence[float]) -> Dict[str, Tuple[np.ndarray, np.ndarray]]:
        """Stokes vectors of photon #2 conditioned on photon #3 = R and = L"""
        curves = self.curves(t23_grid)
        return {p3: curves.bloch_vectors(p3) for p3 in PHOTON3_LABELS}

    def parity_curves(self, t23_grid: Sequence[float], basis: str = "circular") -> Dict[str, List[ConditionalRatio]]:
        if basis not in ("circular", "linear"):
            raise SequenceError(f"unknown parity basis '{basis}'")
        label = "R" if basis == "circular" else "H"
        curves = self.curves(t23_grid)
        return {f"P({label}2|{p3}3)": curves.ratio(label, p3) for p3 in PHOTON3_LABELS}

    def truth_tables(self) -> TruthTable:
        """Truth tables at t23 = t12 (H/V) and t23 = 2 t12 (circular) from simulation"""
        t12 = self.params.t12_ps
        curves = self.curves([t12, 2.0 * t12])
        entries = {
            "p_v_up": curves.ratio("V", "R")[0],
            "p_h_up": curves.ratio("H", "R")[0],
            "p_v_down": curves.ratio("V", "L")[0],
            "p_h_down": curves.ratio("H", "L")[0],
            "p_sp_up": curves.ratio("R", "R")[1],
            "p_sm_up": curves.ratio("L", "R")[1],
            "p_sp_down": curves.ratio("R", "L")[1],
            "p_sm_down": curves.ratio("L", "L")[1],
        }
        undefined = [name for name, ratio in entries.items() if not ratio.defined]
        if undefined:
            raise SequenceError(f"truth table entries undefined: {undefined}")
        return TruthTable(
            **{name: ratio.value for name, ratio in entries.items()},
            uncertainty=0.0,
            uncertainties={name: ratio.stderr for name, ratio in entries.items()},
        )


def default_grid(start_ps: float = 50.0, stop_ps: float = 6500.0, step_ps: float = 50.0) -> np.ndarray:
    count = int(round((stop_ps - start_ps) / step_ps)) + 1
    return start_ps + step_ps * np.arange(count)


def oscillation_period(t: Sequence[float], y: Sequence[float]) -> Optional[float]:
    """Period from interpolated mean crossings; None with fewer than two crossings.

    Rising and falling crossings are paired separately.
    """
    t = np.asarray(t, dtype=float)
    centered = np.asarray(y, dtype=float) - np.nanmean(y)
    rising, falling = [], []
    for i in range(len(t) - 1):
        a, b = centered[i], centered[i + 1]
        if np.isfinite(a) and np.isfinite(b) and a * b < 0:
            crossing = t[i] - a * (t[i + 1] - t[i]) / (b - a)
            (rising if b > a else falling).append(crossing)
    periods = [np.diff(c) for c in (rising, falling) if len(c) >= 2]
    if periods:
        return float(np.mean(np.concatenate(periods)))
    crossings = sorted(rising + falling)
    if len(crossings) < 2:
        return None
    return float(2.0 * np.mean(np.diff(crossings)))


def envelope_contrasts(t: Sequence[float], y: Sequence[float], period: float) -> List[float]:
    """max - min of y over consecutive full periods"""
    t = np.asarray(t, dtype=float)
    y = np.asarray(y, dtype=float)
    contrasts = []
    start = t[0]
    while start + period <= t[-1] + 1e-9:
        mask = (t >= start) & (t < start + period) & np.isfinite(y)
        if np.any(mask):
            contrasts.append(float(np.max(y[mask]) - np.min(y[mask])))
        start += period
    return contrasts
