"""
mrfsim Configuration Management

Declarative run configuration with pydantic validation. Every tunable default of the
pipeline lives here so that a run is fully described by one resolved document, which is
embedded in every output file header.
"""

import json
import math
import os
from pathlib import Path
from typing import Any, Dict, List, Literal, Optional, Tuple, Union

import structlog
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from .errors import ConfigurationError

logger = structlog.get_logger(__name__)

CONFIG_PATH_ENV = "MRFSIM_CONFIG"


class _Section(BaseModel):
    """Base for config sections: unknown keys are rejected."""

    model_config = ConfigDict(extra="forbid", validate_assignment=True)


class GridSettings(_Section):
    size: int = Field(default=256, ge=16)


class PhantomSettings(_Section):
    kind: Literal["three", "eleven"] = "three"
    supersampling: int = Field(default=4, ge=1)


class TrajectorySettings(_Section):
    n_interleaves: int = Field(default=48, ge=1)
    gamma: float = Field(default=1.0, gt=0)
    # Pitches are in units of the Nyquist pitch of the interleaf union (1.0 = exactly Nyquist).
    pitch_inner: float = Field(default=0.5, gt=0)
    pitch_outer: float = Field(default=1.0, gt=0)
    readout_oversampling: float = Field(default=2.0, gt=0)
    readout_sampling: Literal["arc", "angle"] = "arc"


class NufftSettings(_Section):
    oversampling: float = Field(default=2.0, gt=1.0)
    kernel_width: int = Field(default=8, ge=2)
    table_size: int = Field(default=10000, ge=100)


class SpatialResponseSettings(_Section):
    dcf_mode: Literal["scaled", "union"] = "scaled"
    cache_dir: Optional[str] = None


class PhaseSettings(_Section):
    enabled: bool = True
    direction: Tuple[float, float] = (1.0, 0.0)
    range_min: float = -math.pi
    range_max: float = 2 * math.pi

    @model_validator(mode="after")
    def validate_range(self) -> "PhaseSettings":
        if self.range_max < self.range_min:
            raise ValueError("phase range_max must not be below range_min")
        return self


class SequenceSettings(_Section):
    n_timepoints: int = Field(default=480, ge=1)
    inversion: bool = True
    ti_ms: float = Field(default=20.64, ge=0)
    flip_scale: float = Field(default=1.0, gt=0)
    rf_phase_mode: Literal["constant", "alternating"] = "constant"
    epg_state_cap: Optional[int] = Field(default=None, ge=1)
    debug_checks: bool = False


class DictionarySettings(_Section):
    # (start, step, stop) triples, stop inclusive when hit.
    t1_ranges: List[Tuple[float, float, float]] = Field(
        default_factory=lambda: [(2.0, 10.0, 100.0), (100.0, 20.0, 1000.0), (1000.0, 50.0, 3000.0)]
    )
    t2_ranges: List[Tuple[float, float, float]] = Field(
        default_factory=lambda: [(2.0, 5.0, 100.0), (100.0, 10.0, 300.0), (300.0, 50.0, 2000.0)]
    )
    include_tissue_entries: bool = True
    coarse_t1_count: int = Field(default=40, ge=2)
    coarse_t2_count: int = Field(default=30, ge=2)
    coarse_t1_range: Tuple[float, float] = (100.0, 3000.0)
    coarse_t2_range: Tuple[float, float] = (10.0, 2000.0)
    chunk_size: int = Field(default=512, ge=1)


class MatchingSettings(_Section):
    skip_threshold: float = Field(default=1e-3, ge=0)
    chunk_size: int = Field(default=4096, ge=1)


class NoiseSettings(_Section):
    snr_db: float = 9.0
    image_snr_db: Optional[float] = None


class CostSettings(_Section):
    weights: Dict[str, float] = Field(default_factory=lambda: {"wm": 1.0, "gm": 1.0, "csf": 1.0})
    time_ref_ms: float = Field(default=5760.0, gt=0)
    formulation: Literal["scaled", "literal"] = "scaled"
    qf_weight: float = Field(default=0.0, ge=0)

    @field_validator("weights")
    @classmethod
    def validate_weights(cls, v: Dict[str, float]) -> Dict[str, float]:
        if any(w < 0 for w in v.values()):
            raise ValueError("cost weights must be nonnegative")
        if not v or all(w == 0 for w in v.values()):
            raise ValueError("cost weights must not all be zero")
        return v


class AnnealSettings(_Section):
    initial_temp: float = Field(default=1.0, gt=0)
    cooling_rate: float = Field(default=0.95, gt=0, lt=1)
    steps_per_temp: int = Field(default=100, ge=1)
    min_temp: float = Field(default=1e-4, gt=0)
    max_iterations: int = Field(default=5000, ge=1)
    step_scale: float = Field(default=0.1, ge=0)

    @model_validator(mode="after")
    def validate_temperatures(self) -> "AnnealSettings":
        if self.min_temp > self.initial_temp:
            raise ValueError("min_temp must not exceed initial_temp")
        return self


class OptimizerSettings(_Section):
    n_segments: int = Field(default=48, ge=1)
    flip_bounds: Tuple[float, float] = (5.0, 70.0)
    tr_bounds: Tuple[float, float] = (11.0, 15.0)
    restarts: int = Field(default=1, ge=1)

    @model_validator(mode="after")
    def validate_bounds(self) -> "OptimizerSettings":
        lo, hi = self.flip_bounds
        if not 0 <= lo <= hi <= 90:
            raise ValueError("flip_bounds must satisfy 0 <= lo <= hi <= 90")
        lo, hi = self.tr_bounds
        if not 0 < lo <= hi:
            raise ValueError("tr_bounds must satisfy 0 < lo <= hi")
        return self


class RunConfig(BaseSettings):
    """Resolved configuration for one mrfsim run."""

    seed: int = Field(default=0, ge=0)
    threads: int = Field(default=1, ge=1)
    log_level: str = Field(default="INFO")

    grid: GridSettings = Field(default_factory=GridSettings)
    phantom: PhantomSettings = Field(default_factory=PhantomSettings)
    trajectory: TrajectorySettings = Field(default_factory=TrajectorySettings)
    nufft: NufftSettings = Field(default_factory=NufftSettings)
    spatial_response: SpatialResponseSettings = Field(default_factory=SpatialResponseSettings)
    phase: PhaseSettings = Field(default_factory=PhaseSettings)
    sequence: SequenceSettings = Field(default_factory=SequenceSettings)
    dictionary: DictionarySettings = Field(default_factory=DictionarySettings)
    matching: MatchingSettings = Field(default_factory=MatchingSettings)
    noise: NoiseSettings = Field(default_factory=NoiseSettings)
    cost: CostSettings = Field(default_factory=CostSettings)
    optimizer: OptimizerSettings = Field(default_factory=OptimizerSettings)
    anneal: AnnealSettings = Field(default_factory=AnnealSettings)

    model_config = SettingsConfigDict(
        env_prefix="MRFSIM_",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="forbid",
        validate_assignment=True,
    )

    @field_validator('log_level')
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        """Validate log level."""
        valid_levels = ['DEBUG', 'INFO', 'WARNING', 'ERROR', 'CRITICAL']
        if v.upper() not in valid_levels:
            raise ValueError(f"Invalid log level: {v}")
        return v.upper()

    def resolved(self) -> Dict[str, Any]:
        """JSON-safe dump embedded in output headers."""
        return self.model_dump(mode="json")


def _parse_content(path: Path, content: str) -> Dict[str, Any]:
    """Parse file content based on format."""
    if path.suffix == ".json":
        data = json.loads(content)
    elif path.suffix in (".yaml", ".yml"):
        data = yaml.safe_load(content)
    else:
        raise ConfigurationError(f"Unsupported config format: {path.suffix}", details={"path": str(path)})
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigurationError("Config document must be a mapping", details={"path": str(path)})
    return data


def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_run_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """Load a RunConfig from YAML/JSON (path or $MRFSIM_CONFIG) plus explicit overrides."""
    data: Dict[str, Any] = {}
    config_path = path or os.environ.get(CONFIG_PATH_ENV)

    if config_path:
        config_path = Path(config_path)
        if not config_path.exists():
            raise ConfigurationError(f"Config file not found: {config_path}", details={"path": str(config_path)})
        try:
            data = _parse_content(config_path, config_path.read_text(encoding="utf-8"))
        except (json.JSONDecodeError, yaml.YAMLError) as e:
            raise ConfigurationError(f"Config file is not parseable: {e}", details={"path": str(config_path)})

    if overrides:
        data = _deep_merge(data, overrides)

    try:
        config = RunConfig(**data)
    except ValidationError as e:
        raise ConfigurationError(f"Configuration validation failed: {e}", details={"errors": e.errors(include_url=False)})

    logger.debug("Configuration loaded", source=str(config_path) if config_path else "defaults")
    return config
