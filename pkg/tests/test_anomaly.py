import pytest

from reflex_htm.anomaly import ars, classification_metrics, is_match, timing_stats
from reflex_htm.errors import ContractViolation, UndefinedScoreError
from reflex_htm.models import ArsRecord
from reflex_htm.sdr import Sdr


class TestArs:
    def test_partial_overlap(self) -> None:
        predicted = Sdr.of(100, range(0, 20))
        actual = Sdr.of(100, range(5, 25))
        assert ars(predicted, actual) == pytest.approx(0.25)
        assert is_match(predicted, actual)

    def test_exact_prediction_scores_zero(self) -> None:
        a = Sdr.of(64, [3, 9, 27])
        assert ars(a, a) == 0.0

    def test_disjoint_and_empty_prediction(self) -> None:
        actual = Sdr.of(64, [1, 2])
        assert ars(Sdr.of(64, [10, 11]), actual) == 1.0
        assert ars(Sdr.empty(64), actual) == 1.0
        assert not is_match(Sdr.empty(64), actual)

    def test_superset_prediction_is_a_match(self) -> None:
        assert ars(Sdr.of(16, range(16)), Sdr.of(16, [4, 5])) == 0.0

    def test_half_overlap_is_a_match(self) -> None:
        assert is_match(Sdr.of(16, [0, 1]), Sdr.of(16, [0, 1, 2, 3]))
        assert not is_match(Sdr.of(16, [0]), Sdr.of(16, [0, 1, 2, 3]))

    def test_empty_actual_is_undefined(self) -> None:
        with pytest.raises(UndefinedScoreError):
            ars(Sdr.of(8, [1]), Sdr.empty(8))

    def test_width_mismatch(self) -> None:
        with pytest.raises(ContractViolation):
            ars(Sdr.empty(8), Sdr.of(16, [1]))
        with pytest.raises(ContractViolation):
            ars(Sdr.of(8, [1]), Sdr.of(16, [1]))


def record(step: int, matched: bool) -> ArsRecord:
    score = 0.0 if matched else 1.0
    return ArsRecord(step=step, ars_rm=score, ars_sm=score, ars_emitted=score, matched=matched)


class TestClassificationMetrics:
    def test_unlabelled_reports_match_rate_only(self) -> None:
        records = [record(i, i % 4 != 0) for i in range(8)]
        m = classification_metrics(records)
        assert not m.labelled
        assert m.match_rate == pytest.approx(0.75)
        assert m.precision is None and m.f1 is None

    def test_confusion_counts(self) -> None:
        matched = [True, False, False, True, False, True]
        labels = [False, True, False, False, True, True]
        records = [record(i, ok) for i, ok in enumerate(matched)]
        m = classification_metrics(records, labels)
        # flagged = steps 1, 2, 4; anomalies = 1, 4, 5
        assert m.precision == pytest.approx(2 / 3)
        assert m.recall == pytest.approx(2 / 3)
        assert m.f1 == pytest.approx(2 / 3)
        assert m.roc_auc == pytest.approx(2 / 3)

    def test_nothing_flagged_leaves_precision_undefined(self) -> None:
        records = [record(i, True) for i in range(4)]
        m = classification_metrics(records, [False, True, False, False])
        assert m.precision is None
        assert m.recall == 0.0
        assert m.f1 is None

    def test_single_class_has_no_roc_auc(self) -> None:
        records = [record(i, i != 2) for i in range(4)]
        assert classification_metrics(records, [False] * 4).roc_auc is None

    def test_perfect_detector(self) -> None:
        records = [record(i, i not in (3, 7)) for i in range(10)]
        labels = [i in (3, 7) for i in range(10)]
        m = classification_metrics(records, labels)
        assert (m.precision, m.recall, m.f1, m.roc_auc) == (1.0, 1.0, 1.0, 1.0)

    def test_label_length_mismatch(self) -> None:
        with pytest.raises(ContractViolation):
            classification_metrics([record(0, True)], [True, False])


def test_timing_stats() -> None:
    stats = timing_stats([0.001, 0.003, 0.002, 0.002], repeat_count=2)
    assert stats.steps == 2
    assert stats.mean_ms == pytest.approx(2.0)
    assert stats.total_ms == pytest.approx(4.0)
    assert stats.p50_ms == pytest.approx(2.0)
