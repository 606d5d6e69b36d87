import pytest

from reflex_htm.config import SmConfig
from reflex_htm.errors import SnapshotError
from reflex_htm.sdr import Sdr
from reflex_htm.sequence_memory import (
    Predictions,
    Segment,
    SequenceMemory,
    TemporalNetwork,
    segment_activity,
)

COLUMNS = 64
A = Sdr.of(COLUMNS, range(0, 8))
B = Sdr.of(COLUMNS, range(8, 16))
C = Sdr.of(COLUMNS, range(16, 24))


def run_cycle(sm: SequenceMemory, steps: int, learning: bool = True) -> list[Sdr]:
    pattern = [A, B, C]
    return [sm.step(pattern[t % 3], learning).predicted_columns for t in range(steps)]


class TestSegmentActivity:
    def test_counts_connected_synapses_above_theta(self) -> None:
        seg = Segment(
            uid=0,
            cell=9,
            parents=[0, 1, 2, 3],
            perms=[0.6, 0.4, 0.7, 0.9],
            on=[True, True, True, False],
        )
        assert segment_activity(seg, {0, 1, 2, 3}, theta=0.5) == 2
        assert segment_activity(seg, {1, 3}, theta=0.5) == 0


class TestPredictions:
    def test_fresh_network_predicts_nothing(self, toy_sm_config: SmConfig) -> None:
        sm = SequenceMemory(COLUMNS, toy_sm_config)
        assert sm.compute_predictions(frozenset()).predicted_columns == Sdr.empty(COLUMNS)
        out = sm.step(A, learning=True)
        assert out.predicted_columns == Sdr.empty(COLUMNS)
        assert out.bursting_columns == frozenset(A.active)

    def test_unanticipated_columns_burst(self, toy_sm_config: SmConfig) -> None:
        sm = SequenceMemory(COLUMNS, toy_sm_config)
        active, bursting = sm.activate(A, sm.predictions)
        assert len(active) == 8 * toy_sm_config.cells_per_column
        assert bursting == frozenset(A.active)

    def test_predicted_cell_fires_alone(self, toy_sm_config: SmConfig) -> None:
        sm = SequenceMemory(COLUMNS, toy_sm_config)
        cell = 3 * toy_sm_config.cells_per_column + 2
        seg = Segment(uid=0, cell=cell)
        prior = Predictions(
            predictive_cells={cell: 4},
            best_segment={cell: seg},
            active_segments={cell: [seg]},
            matching={},
            predicted_columns=Sdr.of(COLUMNS, [3]),
        )
        active, bursting = sm.activate(Sdr.of(COLUMNS, [3, 4]), prior)
        assert cell in active
        assert len([c for c in active if sm.net.column_of(c) == 3]) == 1
        assert bursting == frozenset({4})


class TestLearningCells:
    def test_highest_dwinner_wins(self, toy_sm_config: SmConfig) -> None:
        sm = SequenceMemory(COLUMNS, toy_sm_config)
        low, high = Segment(uid=0, cell=0), Segment(uid=1, cell=1)
        prior = Predictions(
            predictive_cells={0: 3, 1: 5},
            best_segment={0: low, 1: high},
            active_segments={0: [low], 1: [high]},
            matching={},
            predicted_columns=Sdr.of(COLUMNS, [0]),
        )
        chosen = sm.select_learning_cells(Sdr.of(COLUMNS, [0]), prior, frozenset())
        assert chosen[0] == (1, high)

    def test_burst_picks_fewest_segments(self, toy_sm_config: SmConfig) -> None:
        sm = SequenceMemory(COLUMNS, toy_sm_config)
        sm.net.create_segment(0, stamp=0)
        chosen = sm.select_learning_cells(Sdr.of(COLUMNS, [0]), sm.predictions, frozenset({0}))
        assert chosen[0] == (1, None)


class TestPermanenceRules:
    def make_segment(self, cfg: SmConfig, perm: float) -> tuple[TemporalNetwork, Segment]:
        net = TemporalNetwork(COLUMNS, cfg)
        seg = net.create_segment(100, stamp=0)
        net.add_synapse(seg, 5, perm)
        return net, seg

    def test_ltp(self, toy_sm_config: SmConfig) -> None:
        net, seg = self.make_segment(toy_sm_config, 0.6)
        net.adapt(seg, {5}, inc=0.1, dec=0.05)
        assert seg.perms[0] == pytest.approx(0.7)
        assert seg.on[0]

    def test_ltd_on_false_positive(self, toy_sm_config: SmConfig) -> None:
        net, seg = self.make_segment(toy_sm_config, 0.6)
        net.punish(seg, {5}, dec=0.05)
        assert seg.perms[0] == pytest.approx(0.55)

    def test_clamped_at_one(self, toy_sm_config: SmConfig) -> None:
        net, seg = self.make_segment(toy_sm_config, 1.0)
        net.adapt(seg, {5}, inc=0.1, dec=0.05)
        assert seg.perms[0] == 1.0

    def test_dead_synapses_are_removed(self, toy_sm_config: SmConfig) -> None:
        net, seg = self.make_segment(toy_sm_config, 0.03)
        net.adapt(seg, set(), inc=0.1, dec=0.05)
        assert len(seg) == 0
        assert list(net.segments_fed_by(5)) == []


class TestSequenceLearning:
    def test_learns_period_three_cycle(self, toy_sm_config: SmConfig) -> None:
        sm = SequenceMemory(COLUMNS, toy_sm_config)
        pattern = [A, B, C]
        predictions = run_cycle(sm, 550)
        first_perfect = next(
            t for t in range(549) if all(
                predictions[s] == pattern[(s + 1) % 3] for s in range(t, 549)
            )
        )
        assert first_perfect < 50
        sm.net.check_consistency()

    def test_boost_scales_reinforcement(self, toy_sm_config: SmConfig) -> None:
        plain, boosted = SequenceMemory(COLUMNS, toy_sm_config), SequenceMemory(
            COLUMNS, toy_sm_config
        )
        for sm, boost in ((plain, 1.0), (boosted, 1.5)):
            for x in (A, B, C, A):
                sm.step(x)
            sm.step(B, boost=boost)
        cell = 8 * toy_sm_config.cells_per_column
        assert plain.net.segments[cell][0].perms == pytest.approx([0.31] * 8)
        assert boosted.net.segments[cell][0].perms == pytest.approx([0.36] * 8)

    def test_learning_disabled_leaves_network_untouched(self, toy_sm_config: SmConfig) -> None:
        sm = SequenceMemory(COLUMNS, toy_sm_config)
        run_cycle(sm, 30)
        before = sm.net.to_dict()
        run_cycle(sm, 30, learning=False)
        assert sm.net.to_dict() == before

    def test_reset_keeps_segments(self, toy_sm_config: SmConfig) -> None:
        sm = SequenceMemory(COLUMNS, toy_sm_config)
        run_cycle(sm, 60)
        segments = sm.net.segment_count()
        sm.reset()
        assert sm.predictions.predicted_columns == Sdr.empty(COLUMNS)
        assert sm.net.segment_count() == segments

    def test_width_mismatch(self, toy_sm_config: SmConfig) -> None:
        sm = SequenceMemory(COLUMNS, toy_sm_config)
        with pytest.raises(ValueError):
            sm.step(Sdr.of(32, [1]))


class TestSnapshot:
    def test_round_trip(self, toy_sm_config: SmConfig, tmp_path) -> None:
        sm = SequenceMemory(COLUMNS, toy_sm_config)
        run_cycle(sm, 40)
        sm.save(tmp_path / "sm.json")
        restored = SequenceMemory(COLUMNS, toy_sm_config)
        restored.load(tmp_path / "sm.json")
        assert restored.net.to_dict() == sm.net.to_dict()
        assert restored.iteration == sm.iteration
        assert restored.active_cells == sm.active_cells
        assert restored.winner_cells == sm.winner_cells
        for pattern in (B, C, A):
            assert restored.step(pattern).predicted_columns == sm.step(pattern).predicted_columns
        assert restored.net.to_dict() == sm.net.to_dict()

    def test_corrupted_file(self, toy_sm_config: SmConfig, tmp_path) -> None:
        path = tmp_path / "sm.json"
        path.write_text("{not json")
        with pytest.raises(SnapshotError):
            SequenceMemory(COLUMNS, toy_sm_config).load(path)
