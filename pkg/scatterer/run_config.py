"""
Run configuration shared by the CLI sub-commands.

Values come from config/run_defaults.yaml, then an optional YAML file, then
command-line flags. Everything is validated before any computation starts.
"""

import hashlib
import json
import logging
import math
from pathlib import Path
from typing import Any, Dict, Optional

import yaml
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from config.settings import OUTPUT_DIR, RUN_DEFAULTS_PATH
from scatterer.errors import DomainError
from scatterer.lattice import LatticeSpec
from scatterer.sieves import delta_window
from scatterer.spectral import PHI_EDGE, SpectralParams

logger = logging.getLogger(__name__)


class RunConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    lattice: str = "1/1"
    phi: float = 0.0
    X: float = 1000.0
    delta: float = 0.17
    epsilon_gap: float = Field(default=0.25, ge=0)
    theta: float = 131 / 416
    tail_tol: float = Field(default=1e-6, gt=0)
    window: float = Field(default=10.0, gt=0)
    seed: int = 0
    output_dir: Optional[str] = None

    @field_validator("lattice")
    @classmethod
    def _lattice(cls, value: str) -> str:
        LatticeSpec.parse(value)
        return value.strip()

    @field_validator("X")
    @classmethod
    def _cutoff(cls, value: float) -> float:
        if not math.isfinite(value) or value < 0:
            raise ValueError("X must be nonnegative")
        return value

    @field_validator("phi")
    @classmethod
    def _phi(cls, value: float) -> float:
        if not math.isfinite(value) or abs(value) >= math.pi - PHI_EDGE:
            raise ValueError("phi must lie strictly inside (-pi, pi); phi = pi is the unperturbed Laplacian")
        return value

    @model_validator(mode="after")
    def _windows(self):
        if not self.theta < 1.0 / 3.0:
            raise ValueError(f"theta must be below 1/3, got {self.theta}")
        lo, hi = delta_window(self.theta)
        if not lo < self.delta < hi:
            raise ValueError(f"delta must lie in ({lo:.6f}, {hi:.6f}), got {self.delta}")
        return self

    @property
    def spec(self) -> LatticeSpec:
        return LatticeSpec.parse(self.lattice)

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir) if self.output_dir else Path(OUTPUT_DIR)

    def spectral_params(self) -> SpectralParams:
        return SpectralParams(phi=self.phi, theta=self.theta, tail_tol=self.tail_tol, window=self.window)

    def header_params(self, command: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
        """
        Parameters echoed into output headers; the output location is left out.

        command holds the sub-command name and its own options; its keys must
        not shadow a config field.
        """
        params = self.model_dump(exclude={"output_dir"})
        for key, value in (command or {}).items():
            if key in params:
                raise DomainError(f"command option '{key}' shadows a config field")
            params[key] = value
        return params

    def canonical_json(self, command: Optional[Dict[str, Any]] = None) -> str:
        return json.dumps(self.header_params(command), sort_keys=True, separators=(",", ":"))

    def config_hash(self, command: Optional[Dict[str, Any]] = None) -> str:
        return hashlib.sha256(self.canonical_json(command).encode("utf-8")).hexdigest()


def _read_yaml(path: Path) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except (OSError, yaml.YAMLError) as exc:
        raise DomainError(f"cannot read config {path}: {exc}") from exc
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise DomainError(f"config {path} must be a mapping of keys to values")
    return data


def load_run_config(path=None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """Defaults, then the YAML file at path, then non-None overrides."""
    values = _read_yaml(RUN_DEFAULTS_PATH) if Path(RUN_DEFAULTS_PATH).exists() else {}
    if path is not None:
        values.update(_read_yaml(Path(path)))
    for key, value in (overrides or {}).items():
        if value is not None:
            values[key] = value
    config = RunConfig(**values)
    logger.debug(f"Run config {config.config_hash()[:12]}: {config.canonical_json()}")
    return config
