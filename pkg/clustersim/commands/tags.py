import logging
from pathlib import Path
from typing import Dict, List, Optional

import pandas as pd

from clustersim.exceptions import TagFormatError
from clustersim.schemas import RunConfig
from clustersim.services.report_writer import RunDirectory
from clustersim.services.timetags import (
    WAVEPLATE_SETTINGS, TagGenerator, count_coincidences, default_source_efficiency,
    estimate_conditionals, expected_conditionals, read_stream, setting_by_id, write_stream,
)

logger = logging.getLogger(__name__)

STREAM_SUFFIX = ".tags"


def stream_name(setting_id: int) -> str:
    return f"setting_{setting_id:02d}{STREAM_SUFFIX}"


def build_generator(config: RunConfig) -> TagGenerator:
    options = config.tags
    efficiency = options.source_efficiency
    if efficiency is None:
        efficiency = default_source_efficiency(config.budget)
    return TagGenerator(config.qd, config.monte_carlo, options, efficiency)


def cmd_tags(config: RunConfig, run: RunDirectory, setting_id: Optional[int] = None) -> Dict:
    """Write one tag stream file per waveplate setting"""
    options = config.tags
    setting_id = options.setting_id if setting_id is None else setting_id
    settings = WAVEPLATE_SETTINGS if setting_id is None else (setting_by_id(setting_id),)
    generator = build_generator(config)

    written = []
    for setting in settings:
        streams = generator.generate(setting)
        path = write_stream(run.file(stream_name(setting.setting_id)), streams)
        written.append({"setting_id": setting.setting_id, "labels": list(setting.labels),
                        "file": path.name, "records": streams.record_count})
    summary = {
        "streams": written,
        "arm_factors": generator.arms,
        "rep_period_ps": generator.rep_period_ps,
        "pulse_offsets_ps": list(generator.offsets),
    }
    if setting_id is None:
        summary["expected_conditionals"] = expected_conditionals(generator)
    run.write_json("tags.json", summary)
    return summary


def _stream_paths(inputs: List[str]) -> List[Path]:
    paths = []
    for item in inputs:
        path = Path(item)
        if path.is_dir():
            paths.extend(sorted(path.glob(f"*{STREAM_SUFFIX}")))
        elif path.exists():
            paths.append(path)
        else:
            raise TagFormatError(f"tag stream not found: {path}")
    if not paths:
        raise TagFormatError(f"no tag streams found in {inputs}")
    return paths


def cmd_count(config: RunConfig, run: RunDirectory, inputs: List[str],
              window_ps: Optional[float] = None) -> Dict:
    """Three-fold coincidences per setting and the conditional probabilities they imply"""
    window_ps = config.tags.window_ps if window_ps is None else window_ps
    rows = []
    counts = {}
    for path in _stream_paths(inputs):
        result = count_coincidences(read_stream(path), window_ps)
        labels = result.setting.labels
        counts[labels] = counts.get(labels, 0) + result.coincidences
        rows.append({
            "file": path.name, "setting_id": result.setting.setting_id,
            "p1": labels[0], "p2": labels[1], "p3": labels[2],
            "coincidences": result.coincidences,
            "singles_0": result.singles[0], "singles_1": result.singles[1], "singles_2": result.singles[2],
        })
    run.write_csv("coincidences.csv", pd.DataFrame(rows))

    estimates = estimate_conditionals(counts)
    conditionals = {name: {"value": r.value, "stderr": r.stderr} for name, r in estimates.items()}
    report = {"window_ps": window_ps, "total_coincidences": int(sum(counts.values())),
              "conditionals": conditionals}
    run.write_json("count.json", report)
    return report


def register(subparsers):
    tags = subparsers.add_parser("tags", help="synthetic time-tag streams")
    tags.add_argument("--setting", type=int, default=None, help="waveplate setting id (0-11)")
    tags.set_defaults(handler=lambda config, run, args: cmd_tags(config, run, args.setting))

    count = subparsers.add_parser("count", help="coincidence counting on tag streams")
    count.add_argument("inputs", nargs="+", help="stream files or directories")
    count.add_argument("--window", type=float, default=None, help="coincidence window (ps)")
    count.set_defaults(handler=lambda config, run, args: cmd_count(config, run, args.inputs, args.window))
