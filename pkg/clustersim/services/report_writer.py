import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.12g"

PathLike = Union[str, Path]


def encode_complex_matrix(m) -> list:
    """Row-major nested list of [re, im] pairs"""
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _to_jsonable(value: Any) -> Any:
    if isinstance(value, BaseModel):
        return value.model_dump(mode="json")
    if isinstance(value, dict):
        return {str(k): _to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        if np.iscomplexobj(value):
            return encode_complex_matrix(value)
        return _to_jsonable(value.tolist())
    if isinstance(value, (np.bool_,)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        value = float(value)
    if isinstance(value, float) and not np.isfinite(value):
        return None
    if isinstance(value, Path):
        return str(value)
    return value


class RunDirectory:
    """Output directory of one command run"""

    def __init__(self, root: PathLike, command: str):
        self.path = Path(root) / command
        self.path.mkdir(parents=True, exist_ok=True)

    def file(self, name: str) -> Path:
        return self.path / name

    def write_json(self, name: str, payload: Any) -> Path:
        target = self.file(name)
        target.write_text(json.dumps(_to_jsonable(payload), indent=2, sort_keys=True) + "\n")
        logger.info(f"Wrote {target}")
        return target

    def write_csv(self, name: str, frame: pd.DataFrame) -> Path:
        target = self.file(name)
        frame.to_csv(target, index=False, float_format=CSV_FLOAT_FORMAT)
        logger.info(f"Wrote {target}")
        return target

    def write_text(self, name: str, text: str) -> Path:
        target = self.file(name)
        target.write_text(text if text.endswith("\n") else text + "\n")
        return target

    def echo_config(self, config: BaseModel) -> Path:
        return self.write_json("config.resolved.json", config)


def to_json_text(payload: Dict) -> str:
    return json.dumps(_to_jsonable(payload), indent=2, sort_keys=True)
