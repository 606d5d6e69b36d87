"""Control-unit window sweep node."""

import logging
from typing import Any

from ..config import Mode
from ..models import ExperimentState, SweepRow
from ..pipeline import RunResult
from .mode_runner import engine_config, run_mode

logger = logging.getLogger(__name__)

MAX_ACCURACY_PENALTY = 0.1


def sweep_row(window: int, baseline: RunResult, run: RunResult) -> SweepRow:
    """Compare one AHTM run against the SM-only baseline."""
    speedup = baseline.timing.mean_ms / run.timing.mean_ms if run.timing.mean_ms else 0.0
    return SweepRow(
        window=window,
        accuracy_penalty=baseline.metrics.match_rate - run.metrics.match_rate,
        speedup=speedup,
        rm_fraction=run.rm_fraction,
    )


def run_window_sweep(state: ExperimentState) -> dict[str, Any]:
    """Run the SM-only baseline, then AHTM once per control-unit window."""
    spec = state.spec
    base = engine_config(spec)
    baseline = run_mode(base, Mode.HTM, state.values, state.labels, spec.repeat_count)
    runs: dict[str, RunResult] = {Mode.HTM.label: baseline}
    rows: list[SweepRow] = []
    errors = list(state.errors)
    for window in spec.windows or []:
        cfg = base.with_overrides({"cu.window": window})
        run = run_mode(cfg, Mode.AHTM, state.values, state.labels, spec.repeat_count)
        runs[f"{Mode.AHTM.label} W={window}"] = run
        rows.append(sweep_row(window, baseline, run))
        logger.info(
            "Window %d: RM-served %.3f, speedup %.2fx", window, run.rm_fraction, rows[-1].speedup
        )
        if rows[-1].accuracy_penalty > MAX_ACCURACY_PENALTY:
            errors.append(
                f"window {window}: match rate {rows[-1].accuracy_penalty:.3f} below the baseline"
            )
    return {"runs": runs, "sweep_rows": rows, "errors": errors}
