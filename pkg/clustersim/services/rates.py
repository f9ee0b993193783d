import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import pandas as pd

from clustersim.exceptions import ConfigError
from clustersim.schemas import EFFICIENCY_TOLERANCE, EfficiencyBudget
from clustersim.services import REFERENCE_VALUES

logger = logging.getLogger(__name__)

PHOTON_NUMBERS = (1, 2, 3)
ROW_LABELS = ("first_lens", "fiber", "tomography")


def round_sig(x: float, digits: int = 2) -> float:
    """Round to significant figures the way the published table displays rates"""
    if x == 0.0:
        return 0.0
    return float(f"{x:.{digits}g}")


def efficiency_product(factors: Dict[str, float]) -> float:
    return math.prod(factors.values())


def source_efficiency(budget: EfficiencyBudget) -> float:
    """eta_s: quoted value when present, otherwise eta_C * eta_T * eta_D"""
    if budget.eta_s is not None:
        return budget.eta_s
    return budget.eta_c * budget.eta_t * budget.eta_d


def product_brightness(budget: EfficiencyBudget) -> float:
    """B_FL with eta_s taken as the unrounded product of the composites"""
    return first_lens_brightness(budget.model_copy(update={"eta_s": None}))


def first_lens_brightness(budget: EfficiencyBudget) -> float:
    """B_FL = measured fiber rate / (f * eta_s)"""
    eta_s = source_efficiency(budget)
    if eta_s <= 0.0 or budget.rep_rate_mhz <= 0.0:
        raise ConfigError("setup efficiency and repetition rate must be positive")
    brightness = budget.measured_fiber_rate_mhz / (budget.rep_rate_mhz * eta_s)
    if brightness > 1.0:
        logger.warning(f"Derived first-lens brightness {brightness:.3f} exceeds 1")
    return brightness


@dataclass
class RateTable:
    """n-photon entanglement rates in MHz, exact and as displayed"""
    brightness: float
    rows: Dict[str, List[float]] = field(default_factory=dict)
    # Brightness from the unrounded eta_C * eta_T * eta_D, shown next to the one used
    brightness_from_product: Optional[float] = None

    def rounded(self) -> Dict[str, List[float]]:
        return {name: [round_sig(x) for x in values] for name, values in self.rows.items()}

    def to_frame(self) -> pd.DataFrame:
        records = []
        rounded = self.rounded()
        reference = REFERENCE_VALUES["rate_table"]
        for name, values in self.rows.items():
            for n, exact, shown in zip(PHOTON_NUMBERS, values, rounded[name]):
                published = reference.get(name, [None] * len(PHOTON_NUMBERS))[n - 1]
                records.append({
                    "row": name,
                    "n": n,
                    "rate_mhz": exact,
                    "rate_mhz_rounded": shown,
                    "published_mhz": published,
                    "matches_published": None if published is None else shown == published,
                })
        return pd.DataFrame(records)

    def matches_reference(self) -> bool:
        reference = REFERENCE_VALUES["rate_table"]
        rounded = self.rounded()
        return all(rounded[name] == reference[name] for name in ROW_LABELS)

    def format_text(self) -> str:
        lines = [f"{'':<14}" + "".join(f"{f'n={n}':>10}" for n in PHOTON_NUMBERS)]
        for name, values in self.rounded().items():
            lines.append(f"{name:<14}" + "".join(f"{v:>10g}" for v in values))
        lines.append(f"B_FL = {self.brightness:.3f}")
        if self.brightness_from_product is not None and abs(self.brightness_from_product - self.brightness) >= 5e-4:
            lines.append(
                f"  (eta_C*eta_T*eta_D unrounded gives B_FL = {self.brightness_from_product:.4f};"
                f" the published rates need the quoted eta_s)"
            )
        return "\n".join(lines)


def rate_table(budget: EfficiencyBudget, include_demultiplexer: bool = True) -> RateTable:
    """Rows f B^n, f B^n eta_C^n and f B^n eta_C^n eta_T^n for n = 1..3"""
    if budget.first_lens_brightness is not None:
        brightness = budget.first_lens_brightness
    else:
        brightness = round(first_lens_brightness(budget), 3)

    f = budget.rep_rate_mhz
    stages = {
        "first_lens": 1.0,
        "fiber": budget.eta_c,
        "tomography": budget.eta_c * budget.eta_t,
    }
    if include_demultiplexer:
        stages["demultiplexer"] = budget.eta_c * budget.eta_t * budget.eta_d

    table = RateTable(brightness, brightness_from_product=product_brightness(budget))
    for name, eta in stages.items():
        table.rows[name] = [f * (brightness * eta) ** n for n in PHOTON_NUMBERS]
    return table


def loss_budget_tables(budget: EfficiencyBudget) -> pd.DataFrame:
    """Itemised component factors with the product check of each composite"""
    composites = [
        ("collection", budget.eta_c, budget.collection_factors),
        ("tomography", budget.eta_t, budget.tomography_factors),
        ("demultiplexer", budget.eta_d, budget.demultiplexer_factors),
    ]
    records = []
    for table, composite, factors in composites:
        for component, factor in factors.items():
            records.append({"table": table, "component": component, "efficiency": factor})
        product = efficiency_product(factors) if factors else composite
        records.append({
            "table": table,
            "component": "Total",
            "efficiency": composite,
            "factor_product": product,
            "consistent": abs(product - composite) <= EFFICIENCY_TOLERANCE,
        })
    return pd.DataFrame(records)


def budget_summary(budget: EfficiencyBudget) -> Dict[str, Optional[float]]:
    derived = first_lens_brightness(budget)
    return {
        "eta_s": source_efficiency(budget),
        "eta_s_product": budget.eta_c * budget.eta_t * budget.eta_d,
        "first_lens_brightness": derived,
        "first_lens_brightness_from_product": product_brightness(budget),
        "first_lens_brightness_quoted": budget.first_lens_brightness,
    }
