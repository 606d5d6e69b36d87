"""Configuration management for reflex-htm."""

from enum import Enum
from pathlib import Path
from typing import Any, Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Mode(str, Enum):
    """Which memory stack serves predictions."""

    HTM = "HTM"
    AHTM = "AHTM"
    H_AHTM = "H_AHTM"

    @property
    def label(self) -> str:
        return self.value.replace("_", "-")


class ConfigModel(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)


class ScalarEncoderConfig(ConfigModel):
    """Scalar encoder configuration (`encoder.*`)."""

    width: int = Field(default=1024, gt=1)
    active_width: int = Field(default=40, gt=0)
    min_value: float | None = Field(default=None, alias="min")
    max_value: float | None = Field(default=None, alias="max")
    clip_out_of_range: bool = Field(default=True, alias="clip")

    @model_validator(mode="after")
    def _check(self) -> "ScalarEncoderConfig":
        if not 0 < self.active_width < self.width:
            raise ValueError("encoder.active_width must satisfy 0 < active_width < width")
        if (self.min_value is None) != (self.max_value is None):
            raise ValueError("encoder.min and encoder.max must be set together")
        if self.min_value is not None and not self.min_value < self.max_value:
            raise ValueError("encoder.min must be below encoder.max")
        return self

    @property
    def calibrated(self) -> bool:
        return self.min_value is not None


class SpConfig(ConfigModel):
    """Spatial pooler configuration (`sp.*`)."""

    columns: int = Field(default=1024, gt=0)
    k: int = Field(default=20, ge=1)
    alpha: float = Field(default=0.05, gt=0.0)
    connect_threshold: float = Field(default=0.2, ge=0.0, le=1.0)
    pool_fraction: float = Field(default=0.5, gt=0.0, le=1.0)
    seed: int = 42
    overlap_mode: Literal["connected", "weighted"] = "connected"

    @model_validator(mode="after")
    def _check(self) -> "SpConfig":
        if self.k > self.columns:
            raise ValueError("sp.k must not exceed sp.columns")
        return self


class SmConfig(ConfigModel):
    """Sequence memory configuration (`sm.*`)."""

    cells_per_column: int = Field(default=8, ge=1)
    theta: float = Field(default=0.5, gt=0.0, lt=1.0)
    synapse_connect_threshold: float = Field(default=0.5, gt=0.0, le=1.0)
    activation_threshold: int = Field(default=13, ge=1)
    min_threshold: int = Field(default=10, ge=1)
    new_synapse_count: int = Field(default=20, ge=1)
    perm_inc: float = Field(default=0.1, ge=0.0)
    perm_dec: float = Field(default=0.05, ge=0.0)
    initial_perm: float = Field(default=0.21, ge=0.0, le=1.0)
    max_segments: int = Field(default=32, ge=1)
    max_synapses: int = Field(default=32, ge=1)
    seed: int = 42


class RmConfig(ConfigModel):
    """Reflex memory configuration (`rm.*`).

    `granularity="pair"` counts capacity in (present, next) pairs, which is how the CAM
    stores them; `"entry"` counts distinct present states.
    """

    capacity: int = Field(default=2048, ge=1)
    granularity: Literal["pair", "entry"] = "pair"
    count_limit: int | None = Field(default=255, ge=1)


class CuConfig(ConfigModel):
    """Control unit configuration (`cu.*`)."""

    window: int = Field(default=4, ge=1)
    boost_factor: float = Field(default=1.5, ge=1.0)
    skip_sm_when_rm_confident: bool = True
    pinned: Literal["RM", "SM"] | None = None


class CamConfig(ConfigModel):
    """CAM geometry (`cam.*`): n subarrays of P rows x Q bits per array, M arrays."""

    n: int = Field(default=128, ge=1)
    m: int = Field(default=16, ge=1)
    p: int = Field(default=128, ge=1)
    q: int = Field(default=8, ge=1, le=16)

    @property
    def word_width(self) -> int:
        return self.n * self.q

    @property
    def rows(self) -> int:
        return self.m * self.p


class PipelineConfig(ConfigModel):
    """Complete engine configuration."""

    mode: Mode = Mode.AHTM
    learning: bool = True
    repeat_count: int = Field(default=1, ge=1)
    encoder: ScalarEncoderConfig = Field(default_factory=ScalarEncoderConfig)
    sp: SpConfig = Field(default_factory=SpConfig)
    sm: SmConfig = Field(default_factory=SmConfig)
    rm: RmConfig = Field(default_factory=RmConfig)
    cu: CuConfig = Field(default_factory=CuConfig)
    cam: CamConfig = Field(default_factory=CamConfig)

    @model_validator(mode="after")
    def _check(self) -> "PipelineConfig":
        if self.mode is Mode.H_AHTM and self.cam.word_width != self.sp.columns:
            raise ValueError(
                f"mode H_AHTM needs cam.n * cam.q == sp.columns "
                f"({self.cam.word_width} != {self.sp.columns})"
            )
        if self.mode is Mode.H_AHTM:
            if self.rm.granularity != "pair":
                raise ValueError("mode H_AHTM stores one (present, next) pair per CAM row; "
                                 "rm.granularity must be 'pair'")
            if self.rm.capacity > self.cam.rows:
                raise ValueError(f"rm.capacity {self.rm.capacity} exceeds cam.m * cam.p "
                                 f"({self.cam.rows})")
            if self.rm.count_limit != (1 << self.cam.q) - 1:
                raise ValueError(f"mode H_AHTM needs rm.count_limit == 2**cam.q - 1 "
                                 f"({(1 << self.cam.q) - 1})")
        return self

    def with_overrides(self, overrides: dict[str, Any]) -> "PipelineConfig":
        """Return a validated copy with dotted-key overrides applied."""
        data = self.model_dump(by_alias=True)
        deep_merge(data, unflatten(overrides))
        return PipelineConfig.model_validate(data)


class Settings(BaseSettings):
    """Application settings from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    output_dir: str = Field(default="./output", alias="OUTPUT_DIR")
    config_path: str = Field(default="./config/engine.yaml", alias="CONFIG_PATH")
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")


def unflatten(data: dict[str, Any]) -> dict[str, Any]:
    """Turn `{"sp.k": 20}` style keys into nested dictionaries."""
    nested: dict[str, Any] = {}
    for key, value in data.items():
        if isinstance(value, dict):
            value = unflatten(value)
        parts = str(key).split(".")
        node = nested
        for part in parts[:-1]:
            node = node.setdefault(part, {})
        if isinstance(value, dict) and isinstance(node.get(parts[-1]), dict):
            deep_merge(node[parts[-1]], value)
        else:
            node[parts[-1]] = value
    return nested


def deep_merge(base: dict[str, Any], extra: dict[str, Any]) -> dict[str, Any]:
    for key, value in extra.items():
        if isinstance(value, dict) and isinstance(base.get(key), dict):
            deep_merge(base[key], value)
        else:
            base[key] = value
    return base


def parse_override(text: str) -> tuple[str, Any]:
    """Parse one `key=value` CLI override; the value is read as YAML scalar."""
    key, sep, raw = text.partition("=")
    if not sep or not key.strip():
        raise ValueError(f"override must look like key=value, got {text!r}")
    return key.strip(), yaml.safe_load(raw)


def load_engine_config(
    config_path: str | Path | None, overrides: dict[str, Any] | None = None
) -> PipelineConfig:
    """Load the engine configuration from a YAML file, then apply overrides."""
    data: dict[str, Any] = {}
    if config_path is not None:
        config_path = Path(config_path)
        if not config_path.exists():
            raise FileNotFoundError(f"Configuration file not found: {config_path}")
        with open(config_path, "r", encoding="utf-8") as f:
            data = unflatten(yaml.safe_load(f) or {})
    if overrides:
        deep_merge(data, unflatten(overrides))
    return PipelineConfig.model_validate(data)


def get_settings() -> Settings:
    """Get application settings."""
    return Settings()


def get_engine_config(
    settings: Settings | None = None, overrides: dict[str, Any] | None = None
) -> PipelineConfig:
    """Get the engine configuration named by the settings."""
    if settings is None:
        settings = get_settings()
    return load_engine_config(settings.config_path, overrides)
