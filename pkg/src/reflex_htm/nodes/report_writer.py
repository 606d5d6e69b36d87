"""Report saving node."""

import json
import logging
import re
from pathlib import Path
from typing import Any

import pandas as pd

from ..models import ExperimentState

logger = logging.getLogger(__name__)


def slug(label: str) -> str:
    return re.sub(r"[^A-Za-z0-9]+", "_", label).strip("_").lower()


def write_report(path: Path, report: Any) -> None:
    if isinstance(report, pd.DataFrame):
        report.to_csv(path, index=False, encoding="utf-8")
    else:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(report, f, indent=2)


def save_reports(state: ExperimentState) -> dict[str, Any]:
    """Write the built reports, and per-step traces when requested, to the output directory."""
    output_path = Path(state.spec.output_dir)
    output_path.mkdir(parents=True, exist_ok=True)

    written: list[str] = []
    for filename, report in state.reports.items():
        path = output_path / filename
        write_report(path, report)
        written.append(str(path.absolute()))

    if state.spec.trace:
        name = state.dataset_name or state.spec.source_name
        for label, run in state.runs.items():
            path = output_path / f"{name}_trace_{slug(label)}.jsonl"
            run.write_trace(path)
            written.append(str(path.absolute()))

    logger.info("Wrote %d report files to %s", len(written), output_path)
    return {"written": written}
