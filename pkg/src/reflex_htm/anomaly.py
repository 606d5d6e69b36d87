"""Anomaly raw score, the overlap match rule, and run-level metrics."""

from collections.abc import Sequence

import numpy as np
from sklearn.metrics import confusion_matrix, roc_auc_score

from .errors import ContractViolation, UndefinedScoreError
from .models import ArsRecord, MetricsSummary, TimingStats
from .sdr import Sdr, overlap_count

MATCH_THRESHOLD = 0.5


def ars(predicted: Sdr, actual: Sdr) -> float:
    """1 - |predicted & actual| / |actual|."""
    if not actual.active:
        raise UndefinedScoreError("anomaly score is undefined for an empty actual SDR")
    if not predicted.active:
        if predicted.width != actual.width:
            raise ContractViolation(f"SDR width mismatch: {predicted.width} != {actual.width}")
        return 1.0
    return 1.0 - overlap_count(predicted, actual) / len(actual.active)


def is_match(predicted: Sdr, actual: Sdr) -> bool:
    """At least half of the actual active bits were predicted."""
    return ars(predicted, actual) <= MATCH_THRESHOLD


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def classification_metrics(
    records: Sequence[ArsRecord],
    labels: Sequence[bool] | None = None,
    rm_hit_fraction: float = 0.0,
    mean_step_time_ms: float = 0.0,
) -> MetricsSummary:
    """Score flagged steps (emitted prediction did not match) against ground-truth labels.

    Without labels the run is self-supervised and only the match rate is reported.
    """
    n = len(records)
    if n == 0:
        raise ContractViolation("no records to score")
    flagged = np.array([not r.matched for r in records], dtype=bool)
    summary = MetricsSummary(
        steps=n,
        labelled=labels is not None,
        match_rate=float(1.0 - flagged.mean()),
        rm_hit_fraction=rm_hit_fraction,
        mean_step_time_ms=mean_step_time_ms,
    )
    if labels is None:
        return summary
    if len(labels) != n:
        raise ContractViolation(f"{len(labels)} labels for {n} records")
    truth = np.asarray(labels, dtype=bool)
    tn, fp, fn, tp = confusion_matrix(truth, flagged, labels=[False, True]).ravel()
    precision = _ratio(int(tp), int(tp + fp))
    recall = _ratio(int(tp), int(tp + fn))
    f1 = None
    if precision is not None and recall is not None:
        f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    roc_auc = None
    if truth.any() and not truth.all():
        scores = np.array([r.ars_emitted for r in records])
        roc_auc = float(roc_auc_score(truth, scores))
    return summary.model_copy(
        update={"precision": precision, "recall": recall, "f1": f1, "roc_auc": roc_auc}
    )


def timing_stats(durations_s: Sequence[float], repeat_count: int = 1) -> TimingStats:
    """Per-step timing over `repeat_count` back-to-back runs of equal length."""
    samples = np.asarray(durations_s, dtype=float) * 1000.0
    if samples.size == 0:
        raise ContractViolation("timing needs at least one sample")
    steps = samples.size // repeat_count
    return TimingStats(
        steps=steps,
        repeat_count=repeat_count,
        mean_ms=float(samples.mean()),
        p50_ms=float(np.percentile(samples, 50)),
        p95_ms=float(np.percentile(samples, 95)),
        total_ms=float(samples.sum() / repeat_count),
    )
