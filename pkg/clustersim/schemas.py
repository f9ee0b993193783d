from pydantic import BaseModel, ConfigDict, Field, model_validator
from typing import Dict, Literal, Optional
import math

from clustersim.settings import OUTPUT_DIR

# Absolute tolerance for composite-vs-product efficiency checks (table factors are rounded)
EFFICIENCY_TOLERANCE = 0.01
TRUTH_TABLE_PAIR_TOLERANCE = 0.02


class StrictModel(BaseModel):
    """Base for every config block: unknown keys are rejected"""
    model_config = ConfigDict(extra="forbid", frozen=True)


# Physical model

class QDParams(StrictModel):
    """Quantum-dot and protocol parameters (ps, mT, rad, MHz)"""
    g_e: float = 0.60
    g_h: float = 0.3
    field_mT: float = Field(40.0, ge=0.0)
    sigma_o_mT: float = Field(10.5, ge=0.0)
    t1_ps: float = Field(200.0, gt=0.0)
    theta: float = 0.4
    eta: float = Field(1.0, gt=0.0, le=1.0)
    t12_ps: float = Field(810.0, gt=0.0)
    t23_ps: float = Field(810.0, gt=0.0)
    rep_rate_mhz: float = Field(81.0, gt=0.0)
    normalized_pulse: bool = False
    # Linear detection axes: aligned with the excitation polarization, or fixed to the dot axes
    detection_frame: Literal["excitation", "lab"] = "excitation"

    @property
    def decay_rate(self) -> float:
        return 1.0 / self.t1_ps

    @property
    def rep_period_ps(self) -> float:
        return 1e6 / self.rep_rate_mhz

    def with_updates(self, **changes) -> "QDParams":
        """Validated copy with some fields replaced"""
        return QDParams(**{**self.model_dump(), **changes})


class MonteCarloConfig(StrictModel):
    n_samples: int = Field(1000, ge=1)
    master_seed: int = Field(20221, ge=0, lt=2 ** 64)


# Efficiency budget

class EfficiencyBudget(StrictModel):
    """Setup efficiencies and their measured component transmissions"""
    rep_rate_mhz: float = Field(81.0, gt=0.0)
    measured_fiber_rate_mhz: float = Field(0.8, gt=0.0)
    eta_c: float = Field(0.43, gt=0.0, le=1.0)
    eta_t: float = Field(0.69, gt=0.0, le=1.0)
    eta_d: float = Field(0.18, gt=0.0, le=1.0)
    # Quoted (rounded) values; derived from the factors above when absent
    eta_s: Optional[float] = Field(0.053, gt=0.0, le=1.0)
    first_lens_brightness: Optional[float] = Field(0.186, gt=0.0, le=1.0)
    collection_factors: Dict[str, float] = Field(default_factory=lambda: {
        "Lens and cryostat window": 0.89,
        "Excitation waveplates and mirrors": 0.92,
        "4 Band pass filters": 0.70,
        "Fiber coupling": 0.75,
    })
    tomography_factors: Dict[str, float] = Field(default_factory=lambda: {
        "2 waveplates and polarizing beam-splitter": 0.86,
        "Fiber transmission": 0.9,
        "Detector efficiency": 0.90,
    })
    demultiplexer_factors: Dict[str, float] = Field(default_factory=lambda: {
        "Non polarizing beam splitter 1": 0.63,
        "Non polarizing beam splitter 2": 0.41,
        "Fiber connector": 0.7,
    })

    @model_validator(mode="after")
    def check_composites(self):
        composites = [
            ("eta_c", self.eta_c, self.collection_factors),
            ("eta_t", self.eta_t, self.tomography_factors),
            ("eta_d", self.eta_d, self.demultiplexer_factors),
        ]
        for name, value, factors in composites:
            if not factors:
                continue
            if any(f <= 0.0 or f > 1.0 for f in factors.values()):
                raise ValueError(f"{name} factors must lie in (0, 1]")
            product = math.prod(factors.values())
            if abs(product - value) > EFFICIENCY_TOLERANCE:
                raise ValueError(
                    f"{name}={value} inconsistent with its factor product {product:.4f}"
                )
        if self.eta_s is not None:
            product = self.eta_c * self.eta_t * self.eta_d
            if abs(product - self.eta_s) > EFFICIENCY_TOLERANCE:
                raise ValueError(f"eta_s={self.eta_s} inconsistent with eta_c*eta_t*eta_d={product:.4f}")
        return self


# Measured truth tables

class TruthTable(StrictModel):
    """Conditional probabilities of photon #2 given the spin readout (via photon #3)"""
    p_v_up: float = Field(0.87, ge=0.0, le=1.0)
    p_h_up: float = Field(0.13, ge=0.0, le=1.0)
    p_v_down: float = Field(0.04, ge=0.0, le=1.0)
    p_h_down: float = Field(0.96, ge=0.0, le=1.0)
    p_sp_up: float = Field(0.27, ge=0.0, le=1.0)
    p_sm_up: float = Field(0.73, ge=0.0, le=1.0)
    p_sp_down: float = Field(0.73, ge=0.0, le=1.0)
    p_sm_down: float = Field(0.27, ge=0.0, le=1.0)
    uncertainty: float = Field(0.02, ge=0.0)
    uncertainties: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def check_pairs(self):
        pairs = [
            ("p_v_up", "p_h_up"), ("p_v_down", "p_h_down"),
            ("p_sp_up", "p_sm_up"), ("p_sp_down", "p_sm_down"),
        ]
        for a, b in pairs:
            total = getattr(self, a) + getattr(self, b)
            if abs(total - 1.0) > TRUTH_TABLE_PAIR_TOLERANCE:
                raise ValueError(f"{a} + {b} = {total:.3f}, expected 1")
        unknown = set(self.uncertainties) - set(self.probability_fields())
        if unknown:
            raise ValueError(f"uncertainties given for unknown entries: {sorted(unknown)}")
        return self

    @staticmethod
    def probability_fields():
        return [
            "p_v_up", "p_h_up", "p_v_down", "p_h_down",
            "p_sp_up", "p_sm_up", "p_sp_down", "p_sm_down",
        ]

    def sigma(self, name: str) -> float:
        return self.uncertainties.get(name, self.uncertainty)


# Command option blocks

class CorrelationOptions(StrictModel):
    t23_start_ps: float = Field(50.0, gt=0.0)
    t23_stop_ps: float = Field(6500.0, gt=0.0)
    t23_step_ps: float = Field(50.0, gt=0.0)

    @model_validator(mode="after")
    def check_grid(self):
        if self.t23_stop_ps < self.t23_start_ps:
            raise ValueError("t23_stop_ps must not precede t23_start_ps")
        return self


class FidelityOptions(StrictModel):
    k_max: int = Field(4, ge=1, le=4)
    average_mode: Literal["before", "after"] = "before"
    ideal: bool = False
    condition_time_ps: Optional[float] = Field(None, gt=0.0)
    batches: int = Field(10, ge=2)
    convergence_tolerance: float = Field(0.05, gt=0.0, lt=1.0)


class BoundsOptions(StrictModel):
    measured: TruthTable = Field(default_factory=TruthTable)
    s_x: float = Field(-0.915, ge=-1.0, le=1.0)
    n_processes: int = Field(100, ge=1)
    seed: int = Field(7, ge=0)


class TagOptions(StrictModel):
    setting_id: Optional[int] = Field(None, ge=0, lt=12)
    duration_s: float = Field(1.25e-3, gt=0.0)
    seed: int = Field(11, ge=0)
    window_ps: float = Field(500.0, gt=0.0)
    jitter_ps: float = Field(20.0, ge=0.0)
    pulse_start_ps: float = Field(1000.0, ge=0.0)
    source_efficiency: Optional[float] = Field(None, ge=0.0, le=1.0)
    npbs1_transmission: float = Field(0.63, ge=0.0, le=1.0)
    npbs2_transmission: float = Field(0.41, ge=0.0, le=1.0)
    npbs1_reflection: float = Field(0.27, ge=0.0, le=1.0)
    npbs2_reflection: float = Field(0.41, ge=0.0, le=1.0)
    connector: float = Field(0.7, ge=0.0, le=1.0)


class FitStart(StrictModel):
    g_e: float = 0.55
    g_h: float = 0.25
    theta: float = 0.5
    sigma_o_mT: float = 9.0


class FitOptions(StrictModel):
    dataset: Optional[str] = None
    start: FitStart = Field(default_factory=FitStart)
    max_iterations: int = Field(500, ge=1)
    simplex_tolerance: float = Field(1e-3, gt=0.0)
    initial_step: float = Field(0.1, gt=0.0, le=0.5)


class RunConfig(StrictModel):
    qd: QDParams = Field(default_factory=QDParams)
    monte_carlo: MonteCarloConfig = Field(default_factory=MonteCarloConfig)
    budget: EfficiencyBudget = Field(default_factory=EfficiencyBudget)
    correlations: CorrelationOptions = Field(default_factory=CorrelationOptions)
    fidelity: FidelityOptions = Field(default_factory=FidelityOptions)
    bounds: BoundsOptions = Field(default_factory=BoundsOptions)
    tags: TagOptions = Field(default_factory=TagOptions)
    fit: FitOptions = Field(default_factory=FitOptions)
    output_dir: str = OUTPUT_DIR
