"""Report generation node: metrics, timing, sweep and cost reports."""

from typing import Any

import pandas as pd

from ..config import Mode
from ..models import REPORT_SCHEMA_VERSION, ExperimentState, MetricsRow, SweepRow
from ..pipeline import RunResult


def metrics_row(dataset: str, label: str, run: RunResult) -> MetricsRow:
    m = run.metrics
    stats = run.rm_stats or {}
    return MetricsRow(
        dataset=dataset,
        mode=label,
        precision=m.precision,
        recall=m.recall,
        f1=m.f1,
        roc_auc=m.roc_auc,
        match_rate=m.match_rate,
        rm_hit_fraction=m.rm_hit_fraction,
        rm_hits=stats.get("hits", 0),
        rm_misses=stats.get("misses", 0),
        rm_evictions=stats.get("evictions", 0),
    )


def metrics_frame(dataset: str, runs: dict[str, RunResult]) -> pd.DataFrame:
    """One row per dataset x mode."""
    rows = [metrics_row(dataset, label, run).model_dump() for label, run in runs.items()]
    return pd.DataFrame(rows)


def timing_frame(dataset: str, runs: dict[str, RunResult]) -> pd.DataFrame:
    """Processing time per dataset with one column per mode, plus speedups over HTM."""
    row: dict[str, Any] = {"schema_version": REPORT_SCHEMA_VERSION, "dataset": dataset}
    by_mode = {run.mode: run for run in runs.values()}
    if by_mode:
        row["repeat_count"] = next(iter(by_mode.values())).timing.repeat_count
    for mode in Mode:
        if mode in by_mode:
            row[f"{mode.label} (ms)"] = by_mode[mode].timing.total_ms
    for mode in Mode:
        if mode in by_mode:
            row[f"{mode.label} (ms/step)"] = by_mode[mode].timing.mean_ms
    htm = by_mode.get(Mode.HTM)
    for mode in (Mode.AHTM, Mode.H_AHTM):
        run = by_mode.get(mode)
        if htm is not None and run is not None and run.timing.total_ms > 0:
            row[f"speedup HTM/{mode.label}"] = htm.timing.total_ms / run.timing.total_ms
    if Mode.H_AHTM in by_mode:
        row["H-AHTM CAM (ns/step)"] = by_mode[Mode.H_AHTM].cam_latency_ns_per_step
    return pd.DataFrame([row])


def sweep_frame(rows: list[SweepRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows])


def cost_report(dataset: str, runs: dict[str, RunResult]) -> dict[str, Any] | None:
    for run in runs.values():
        if run.ledger is not None:
            return {
                "schema_version": REPORT_SCHEMA_VERSION,
                "dataset": dataset,
                "steps": len(run.traces),
                "repeat_count": run.timing.repeat_count,
                "ledger": run.ledger.as_dict(),
                "cam_latency_ns_per_step": run.cam_latency_ns_per_step,
                "rm_stats": run.rm_stats,
            }
    return None


def build_reports(state: ExperimentState) -> dict[str, Any]:
    """Assemble every report in memory; nothing is written here."""
    name = state.dataset_name or state.spec.source_name
    reports: dict[str, Any] = {}
    if state.sweep_rows:
        reports[f"{name}_sweep.csv"] = sweep_frame(state.sweep_rows)
    reports[f"{name}_metrics.csv"] = metrics_frame(name, state.runs)
    reports[f"{name}_timing.csv"] = timing_frame(name, state.runs)
    cost = cost_report(name, state.runs)
    if cost is not None:
        reports[f"{name}_cost_ledger.json"] = cost
    return {"reports": reports}
