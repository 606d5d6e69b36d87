import pytest

from reflex_htm.config import CuConfig
from reflex_htm.control_unit import (
    ControlUnit,
    MemoryAction,
    Module,
    apply_training_rules,
)
from reflex_htm.errors import ContractViolation


def cu(window: int = 4, **kwargs) -> ControlUnit:
    return ControlUnit(CuConfig(window=window, **kwargs))


class TestChoose:
    def test_lower_windowed_anomaly_wins(self) -> None:
        unit = cu(window=2)
        unit.record_outcome(0.5, 1.0)
        unit.record_outcome(0.7, 1.0)
        assert (unit.rm_sum, unit.sm_sum) == pytest.approx((1.2, 2.0))
        assert unit.choose() is Module.RM

    def test_sm_chosen_when_rm_worse(self) -> None:
        unit = cu(window=2)
        unit.record_outcome(1.0, 0.5)
        unit.record_outcome(1.0, 0.5)
        assert unit.choose() is Module.SM

    def test_tie_prefers_rm(self) -> None:
        unit = cu(window=3)
        unit.record_outcome(0.25, 0.25)
        assert unit.choose() is Module.RM

    def test_cold_start_prefers_rm(self) -> None:
        assert cu().choose() is Module.RM

    def test_window_forgets_old_scores(self) -> None:
        unit = cu(window=2)
        unit.record_outcome(1.0, 0.0)
        unit.record_outcome(0.0, 0.2)
        unit.record_outcome(0.0, 0.2)
        assert unit.rm_sum == 0.0
        assert unit.choose() is Module.RM

    def test_pinned(self) -> None:
        unit = cu(pinned="SM")
        unit.record_outcome(0.0, 1.0)
        assert unit.choose() is Module.SM

    def test_scores_must_be_in_unit_interval(self) -> None:
        with pytest.raises(ContractViolation):
            cu().record_outcome(1.5, 0.0)
        with pytest.raises(ContractViolation):
            cu().record_outcome(0.0, -0.1)

    def test_trace(self) -> None:
        unit = cu(window=2)
        unit.record_outcome(0.3, 0.6)
        trace = unit.trace()
        assert trace.chosen is Module.RM
        assert (trace.rm_ars, trace.sm_ars) == (0.3, 0.6)


class TestTrainingRules:
    def test_both_wrong(self) -> None:
        assert apply_training_rules(False, False) == {
            MemoryAction.RM_DECREMENT,
            MemoryAction.RM_OBSERVE,
            MemoryAction.SM_LEARN,
        }

    def test_only_sm_right(self) -> None:
        actions = apply_training_rules(False, True)
        assert MemoryAction.USE_SM in actions
        assert {MemoryAction.RM_DECREMENT, MemoryAction.RM_RETRAIN} <= actions

    def test_only_rm_right(self) -> None:
        assert apply_training_rules(True, False) == {
            MemoryAction.USE_RM,
            MemoryAction.SM_LEARN,
        }

    def test_both_right_reinforces_sm(self) -> None:
        actions = apply_training_rules(True, True)
        assert MemoryAction.USE_RM in actions
        assert MemoryAction.SM_LEARN_BOOSTED in actions

    def test_boost_needs_unpinned_unit(self) -> None:
        actions = apply_training_rules(True, True)
        assert cu(boost_factor=1.5).boost_for(actions) == 1.5
        assert cu(boost_factor=1.5, pinned="SM").boost_for(actions) == 1.0
        assert cu(boost_factor=1.5).boost_for(apply_training_rules(True, False)) == 1.0


def rm_fraction(window: int, steps: int = 200) -> float:
    """Share of RM choices against a steady SM and an RM that slips twice every 20 steps."""
    unit = cu(window=window)
    chosen = []
    for t in range(steps):
        rm_ars = 1.0 if t % 20 in (10, 11) else 0.0
        unit.record_outcome(rm_ars, 0.4)
        chosen.append(unit.choose())
    return chosen.count(Module.RM) / steps


def test_longer_windows_ride_out_rm_slips() -> None:
    fractions = [rm_fraction(w) for w in (2, 4, 8, 16, 32)]
    assert fractions == sorted(fractions)
    assert fractions[0] == pytest.approx(0.85)
    assert fractions[-1] == 1.0
