"""
Export results to flat files.

Every file starts with a header carrying the config hash and the run
parameters: a `#` comment line for CSV, a leading "header" object for JSON.
Floats are written with 17 significant digits and nothing time-dependent is
written, so reruns of the same config are byte-identical.
"""

import json
import logging
import math
from pathlib import Path
from typing import Any, Mapping

import numpy as np
import pandas as pd

from scatterer.errors import OutputError

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.17g"


def header_line(config_hash: str, params: Mapping[str, Any]) -> str:
    fields = " ".join(f"{key}={params[key]}" for key in sorted(params))
    return f"# scatterer config_hash={config_hash} {fields}".rstrip()


def _ensure_parent(path: Path) -> None:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {path.parent}: {exc}") from exc


def write_csv(frame: pd.DataFrame, path, config_hash: str, params: Mapping[str, Any]) -> Path:
    """Write frame as CSV below a header line."""
    path = Path(path)
    _ensure_parent(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(header_line(config_hash, params) + "\n")
            frame.to_csv(handle, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    logger.info(f"CSV exported: {len(frame)} rows -> {path}")
    return path


def _plain(value):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as null."""
    if isinstance(value, Mapping):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, complex):
        return {"re": _plain(value.real), "im": _plain(value.imag)}
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(summary: Mapping[str, Any], path, config_hash: str, params: Mapping[str, Any]) -> Path:
    """Write summary as JSON with the header object first."""
    path = Path(path)
    _ensure_parent(path)
    payload = {"header": {"config_hash": config_hash, "params": dict(params)}}
    payload.update(summary)
    try:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            json.dump(_plain(payload), handle, indent=2, ensure_ascii=False)
            handle.write("\n")
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    logger.info(f"JSON summary exported -> {path}")
    return path


def read_csv(path) -> pd.DataFrame:
    """Read a file written by write_csv, skipping its header line."""
    return pd.read_csv(path, comment="#")
