"""Stream loading node: CSV datasets or synthetic generators."""

import logging
from pathlib import Path
from typing import Any

import pandas as pd

from ..errors import DatasetError
from ..models import ExperimentState
from ..streams import build_synth

logger = logging.getLogger(__name__)

TRUTHY = {"1", "1.0", "true", "yes", "y", "anomaly"}


def parse_labels(column: pd.Series) -> list[bool]:
    """Truthy cells (1, true, yes, anomaly) mark anomalies."""
    return column.astype(str).str.strip().str.lower().isin(TRUTHY).tolist()


def load_dataset(
    path: str | Path, column: str = "value", label_column: str | None = None
) -> tuple[list[float], list[bool] | None, int]:
    """Read one numeric column (and optional labels) from a headed CSV file.

    Returns the values, the labels and how many non-numeric rows were dropped.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as e:
        raise DatasetError(str(path), "file not found") from e
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DatasetError(str(path), f"unreadable CSV ({e})") from e

    for name in filter(None, (column, label_column)):
        if name not in frame.columns:
            raise DatasetError(
                str(path), f"no column {name!r}; available: {', '.join(map(str, frame.columns))}"
            )

    values = pd.to_numeric(frame[column], errors="coerce")
    keep = values.notna() & values.abs().ne(float("inf"))
    dropped = int((~keep).sum())
    if dropped:
        logger.warning("Dropped %d non-numeric rows from %s", dropped, path)
    if not keep.any():
        raise DatasetError(str(path), f"column {column!r} holds no numeric values")

    labels = parse_labels(frame.loc[keep, label_column]) if label_column else None
    return values[keep].astype(float).tolist(), labels, dropped


def load_stream(state: ExperimentState) -> dict[str, Any]:
    """Load the experiment's value stream and any ground-truth labels."""
    spec = state.spec
    if spec.synth is not None:
        seed = spec.overrides.get("sp.seed")
        stream = build_synth(spec.synth, seed=seed)
        logger.info("Built synthetic stream %s with %d values", spec.synth, len(stream))
        return {
            "values": stream.values,
            "labels": stream.labels,
            "dataset_name": spec.source_name,
        }

    values, labels, dropped = load_dataset(spec.dataset, spec.column, spec.label_column)
    logger.info("Loaded %d values from %s", len(values), spec.dataset)
    errors = list(state.errors)
    if dropped:
        errors.append(f"{spec.dataset}: dropped {dropped} non-numeric rows of {spec.column!r}")
    return {
        "values": values,
        "labels": labels,
        "dataset_name": spec.source_name,
        "errors": errors,
    }
