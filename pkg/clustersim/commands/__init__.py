# Command package: one module per CLI subcommand group

import json
import logging
from pathlib import Path
from typing import Optional

from pydantic import ValidationError

from clustersim.exceptions import ConfigError
from clustersim.schemas import RunConfig
from clustersim.settings import DEFAULT_CONFIG_PATH

logger = logging.getLogger(__name__)


def format_validation_error(error: ValidationError) -> str:
    """One line per failing field, as dotted path: message"""
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "; ".join(lines)


def load_run_config(path: Optional[str] = None, seed: Optional[int] = None,
                    samples: Optional[int] = None, out: Optional[str] = None) -> RunConfig:
    """Read and validate the run configuration, then apply command-line overrides"""
    config_path = Path(path or DEFAULT_CONFIG_PATH)
    if config_path.exists():
        try:
            document = json.loads(config_path.read_text())
        except json.JSONDecodeError as e:
            raise ConfigError(f"{config_path} is not valid JSON: {e}") from e
    elif path:
        raise ConfigError(f"config file not found: {config_path}")
    else:
        logger.warning(f"Default config {config_path} not found, using built-in defaults")
        document = {}
    if not isinstance(document, dict):
        raise ConfigError(f"{config_path} must contain a JSON object")

    monte_carlo = dict(document.get("monte_carlo", {}))
    if seed is not None:
        monte_carlo["master_seed"] = seed
    if samples is not None:
        monte_carlo["n_samples"] = samples
    if monte_carlo:
        document["monte_carlo"] = monte_carlo
    if out is not None:
        document["output_dir"] = out

    try:
        return RunConfig(**document)
    except ValidationError as e:
        raise ConfigError(f"invalid configuration: {format_validation_error(e)}") from e
