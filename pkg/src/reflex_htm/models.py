"""Data models for reflex-htm runs and reports."""

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .config import Mode

REPORT_SCHEMA_VERSION = 1


class ArsRecord(BaseModel):
    """Anomaly scores of one step's predictions against the input that followed."""

    step: int
    ars_rm: float = Field(ge=0.0, le=1.0)
    ars_sm: float = Field(ge=0.0, le=1.0)
    ars_emitted: float = Field(ge=0.0, le=1.0)
    matched: bool


class MetricsSummary(BaseModel):
    """Detection quality of one run. Undefined ratios are None."""

    steps: int
    labelled: bool  # False: self-supervised, only match_rate is meaningful
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    roc_auc: float | None = None
    match_rate: float
    rm_hit_fraction: float = 0.0
    mean_step_time_ms: float = 0.0


class TimingStats(BaseModel):
    """Wall-clock step timing averaged over repeated runs."""

    steps: int
    repeat_count: int
    mean_ms: float
    p50_ms: float
    p95_ms: float
    total_ms: float  # per run, averaged over repeats


class ExperimentSpec(BaseModel):
    """What the `run` and `sweep` commands execute."""

    model_config = ConfigDict(extra="forbid")

    dataset: str | None = None
    synth: str | None = None
    column: str = "value"
    label_column: str | None = None
    modes: list[Mode] = Field(default_factory=lambda: [Mode.HTM, Mode.AHTM, Mode.H_AHTM])
    config_path: str | None = None
    overrides: dict[str, Any] = Field(default_factory=dict)
    output_dir: str = "./output"
    repeat_count: int = Field(default=1, ge=1)
    trace: bool = False
    windows: list[int] | None = None

    @field_validator("modes")
    @classmethod
    def _modes(cls, v: list[Mode]) -> list[Mode]:
        if not v:
            raise ValueError("at least one mode is required")
        return list(dict.fromkeys(v))

    @field_validator("windows")
    @classmethod
    def _windows(cls, v: list[int] | None) -> list[int] | None:
        if v is None:
            return v
        if len(v) < 2:
            raise ValueError("a window sweep needs at least two window values")
        if any(w < 1 for w in v):
            raise ValueError("window values must be positive")
        return sorted(set(v))

    @model_validator(mode="after")
    def _source(self) -> "ExperimentSpec":
        if (self.dataset is None) == (self.synth is None):
            raise ValueError("give exactly one of dataset or synth")
        return self

    @property
    def source_name(self) -> str:
        if self.dataset is not None:
            return self.dataset.replace("\\", "/").rsplit("/", 1)[-1].rsplit(".", 1)[0]
        return self.synth.split(":", 1)[0]


class MetricsRow(BaseModel):
    """One dataset x mode line of the metrics report."""

    schema_version: int = REPORT_SCHEMA_VERSION
    dataset: str
    mode: str
    precision: float | None
    recall: float | None
    f1: float | None
    roc_auc: float | None
    match_rate: float
    rm_hit_fraction: float
    rm_hits: int = 0
    rm_misses: int = 0
    rm_evictions: int = 0


class SweepRow(BaseModel):
    schema_version: int = REPORT_SCHEMA_VERSION
    window: int
    accuracy_penalty: float
    speedup: float
    rm_fraction: float


class ExperimentState(BaseModel):
    """State for the experiment workflow."""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    spec: ExperimentSpec

    # Loaded stream
    values: list[float] = Field(default_factory=list)
    labels: list[bool] | None = None
    dataset_name: str = ""

    # Results
    runs: dict[str, Any] = Field(default_factory=dict)  # mode label -> RunResult
    sweep_rows: list[SweepRow] = Field(default_factory=list)
    reports: dict[str, Any] = Field(default_factory=dict)  # file name -> DataFrame or dict

    # Output
    written: list[str] = Field(default_factory=list)
    errors: list[str] = Field(default_factory=list)
