import logging
from typing import Dict

from clustersim.schemas import RunConfig
from clustersim.services.rates import budget_summary, loss_budget_tables, rate_table
from clustersim.services.report_writer import RunDirectory

logger = logging.getLogger(__name__)


def cmd_rates(config: RunConfig, run: RunDirectory) -> Dict:
    """Entanglement-rate table with a diff against the published values"""
    table = rate_table(config.budget)
    run.write_csv("rate_table.csv", table.to_frame())
    run.write_csv("loss_budget.csv", loss_budget_tables(config.budget))
    run.write_text("rate_table.txt", table.format_text())
    print(table.format_text())

    summary = budget_summary(config.budget)
    summary["brightness_used"] = table.brightness
    summary["matches_published"] = table.matches_reference()
    summary["rates_mhz"] = table.rows
    run.write_json("rates.json", summary)
    return summary


def register(subparsers):
    parser = subparsers.add_parser("rates", help="n-photon entanglement rate table")
    parser.set_defaults(handler=lambda config, run, args: cmd_rates(config, run))
