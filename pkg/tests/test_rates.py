import pytest
from pydantic import ValidationError

from clustersim.exceptions import ConfigError
from clustersim.schemas import EfficiencyBudget
from clustersim.services import REFERENCE_VALUES
from clustersim.services.rates import (
    PHOTON_NUMBERS, budget_summary, first_lens_brightness, loss_budget_tables, rate_table, round_sig,
    source_efficiency,
)

LOSSLESS = dict(
    eta_c=1.0, eta_t=1.0, eta_d=1.0, eta_s=1.0, first_lens_brightness=1.0,
    collection_factors={}, tomography_factors={}, demultiplexer_factors={},
)


def test_first_lens_brightness_from_measured_rate():
    budget = EfficiencyBudget()
    assert first_lens_brightness(budget) == pytest.approx(0.8 / (81 * 0.053))
    assert first_lens_brightness(budget) == pytest.approx(0.186, abs=1e-3)


def test_brightness_scales_with_measured_rate():
    single = first_lens_brightness(EfficiencyBudget())
    double = first_lens_brightness(EfficiencyBudget(measured_fiber_rate_mhz=1.6))
    assert double == pytest.approx(2 * single)


def test_lossless_brightness_is_one():
    budget = EfficiencyBudget(**{**LOSSLESS, "measured_fiber_rate_mhz": 81.0})
    assert first_lens_brightness(budget) == pytest.approx(1.0)


def test_source_efficiency_falls_back_to_product():
    budget = EfficiencyBudget(eta_s=None)
    assert source_efficiency(budget) == pytest.approx(0.43 * 0.69 * 0.18)


def test_rate_table_reproduces_published_values():
    table = rate_table(EfficiencyBudget())
    rounded = table.rounded()
    for row, values in REFERENCE_VALUES["rate_table"].items():
        assert rounded[row] == values
    assert table.matches_reference()


def test_lossless_rates_equal_repetition_rate():
    table = rate_table(EfficiencyBudget(**LOSSLESS))
    for values in table.rows.values():
        assert values == pytest.approx([81.0] * len(PHOTON_NUMBERS))


def test_single_photon_rows_telescope():
    budget = EfficiencyBudget()
    rows = rate_table(budget).rows
    assert rows["fiber"][0] / rows["first_lens"][0] == pytest.approx(budget.eta_c)
    assert rows["tomography"][0] / rows["fiber"][0] == pytest.approx(budget.eta_t)
    assert rows["demultiplexer"][0] / rows["tomography"][0] == pytest.approx(budget.eta_d)


def test_rates_decrease_with_photon_number_and_losses():
    rows = rate_table(EfficiencyBudget()).rows
    for values in rows.values():
        assert values[0] > values[1] > values[2]
    order = ["first_lens", "fiber", "tomography", "demultiplexer"]
    for n in range(len(PHOTON_NUMBERS)):
        column = [rows[name][n] for name in order]
        assert all(a > b for a, b in zip(column, column[1:]))


def test_table_without_demultiplexer_row():
    table = rate_table(EfficiencyBudget(), include_demultiplexer=False)
    assert set(table.rows) == {"first_lens", "fiber", "tomography"}


def test_rate_frame_flags_published_matches():
    frame = rate_table(EfficiencyBudget()).to_frame()
    published = frame[frame["row"] != "demultiplexer"]
    assert published["matches_published"].all()
    assert frame[frame["row"] == "demultiplexer"]["published_mhz"].isna().all()


def test_loss_budget_tables_are_consistent():
    frame = loss_budget_tables(EfficiencyBudget())
    totals = frame[frame["component"] == "Total"]
    assert list(totals["table"]) == ["collection", "tomography", "demultiplexer"]
    assert totals["consistent"].all()
    collection = totals[totals["table"] == "collection"]["factor_product"].iloc[0]
    assert collection == pytest.approx(0.89 * 0.92 * 0.70 * 0.75)


def test_inconsistent_composite_rejected():
    with pytest.raises(ValidationError):
        EfficiencyBudget(eta_c=0.6)
    with pytest.raises(ValidationError):
        EfficiencyBudget(eta_s=0.2)


def test_budget_summary():
    summary = budget_summary(EfficiencyBudget())
    assert summary["eta_s"] == 0.053
    assert summary["first_lens_brightness_quoted"] == 0.186


def test_zero_repetition_rate_is_not_configurable():
    with pytest.raises(ValidationError):
        EfficiencyBudget(rep_rate_mhz=0.0)


@pytest.mark.parametrize("value, expected", [
    (15.066, 15.0), (2.8023, 2.8), (0.52124, 0.52), (0.041437, 0.041), (0.013614, 0.014), (0.0, 0.0),
])
def test_round_sig(value, expected):
    assert round_sig(value) == expected


def test_config_error_type_for_bad_efficiency():
    budget = EfficiencyBudget.model_construct(**{**EfficiencyBudget().model_dump(), "eta_s": 0.0})
    with pytest.raises(ConfigError):
        first_lens_brightness(budget)


def test_rate_text_shows_brightness_from_unrounded_product():
    table = rate_table(EfficiencyBudget())
    assert table.brightness == 0.186
    assert table.brightness_from_product == pytest.approx(0.8 / (81 * 0.43 * 0.69 * 0.18))
    assert table.brightness_from_product == pytest.approx(0.1849, abs=1e-4)
    text = table.format_text()
    assert "B_FL = 0.186" in text
    assert "0.1849" in text


def test_rate_text_has_no_note_when_brightness_is_derived():
    budget = EfficiencyBudget(eta_s=None, first_lens_brightness=None)
    text = rate_table(budget).format_text()
    assert "unrounded" not in text
    assert budget_summary(budget)["first_lens_brightness_from_product"] == pytest.approx(0.1849, abs=1e-4)
