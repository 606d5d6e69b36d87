"""Mode comparison node: one run of the stream per requested mode."""

import logging
from typing import Any

from ..config import Mode, PipelineConfig, load_engine_config
from ..models import ExperimentSpec, ExperimentState
from ..pipeline import RunResult, run_stream

logger = logging.getLogger(__name__)


def engine_config(spec: ExperimentSpec) -> PipelineConfig:
    """The validated engine configuration an experiment runs with."""
    return load_engine_config(spec.config_path, spec.overrides)


def config_for_mode(base: PipelineConfig, mode: Mode, repeat_count: int) -> PipelineConfig:
    return base.with_overrides({"mode": mode.value, "repeat_count": repeat_count})


def run_mode(
    base: PipelineConfig,
    mode: Mode,
    values: list[float],
    labels: list[bool] | None,
    repeat_count: int = 1,
) -> RunResult:
    return run_stream(config_for_mode(base, mode, repeat_count), values, labels)


def run_modes(state: ExperimentState) -> dict[str, Any]:
    """Run every requested mode over the same stream."""
    spec = state.spec
    base = engine_config(spec)
    runs: dict[str, RunResult] = {}
    for mode in spec.modes:
        logger.info("Running %s over %d values", mode.label, len(state.values))
        runs[mode.label] = run_mode(base, mode, state.values, state.labels, spec.repeat_count)
    return {"runs": runs}
