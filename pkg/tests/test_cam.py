import numpy as np
import pytest

from reflex_htm.cam import UNIT_COSTS, CamGeometry, CamUnit, CostLedger, Stage
from reflex_htm.config import CamConfig
from reflex_htm.errors import CamAddressError, ContractViolation, SnapshotError

SMALL = CamGeometry(n=4, m=1, p=8, q=4)


def word(*bits: int, width: int = SMALL.word_width) -> np.ndarray:
    out = np.zeros(width, dtype=bool)
    out[list(bits)] = True
    return out


class TestGeometry:
    def test_default_shape(self) -> None:
        g = CamGeometry()
        assert g.word_width == 1024
        assert g.rows == 2048
        assert g.confidence_max == 255

    def test_from_config(self) -> None:
        g = CamGeometry.from_config(CamConfig(n=32, m=2, p=16, q=8))
        assert (g.word_width, g.rows) == (256, 32)

    def test_rejects_empty_dimension(self) -> None:
        with pytest.raises(ContractViolation):
            CamGeometry(n=0)


class TestWriteSearch:
    def test_exact_match_only(self) -> None:
        cam = CamUnit(SMALL)
        cam.write(Stage.PRESENT, 2, word(1, 5))
        cam.write(Stage.PRESENT, 6, word(1, 5, 9))
        assert cam.search(Stage.PRESENT, word(1, 5)).rows == [2]
        assert cam.search(Stage.PRESENT, word(1, 5, 9)).rows == [6]
        result = cam.search(Stage.PRESENT, word(1))
        assert result.miss and result.rows == []

    def test_invalid_rows_never_match(self) -> None:
        cam = CamUnit(SMALL)
        assert cam.search(Stage.PRESENT, word()).miss

    def test_search_both_needs_both_stages(self) -> None:
        cam = CamUnit(SMALL)
        cam.write(Stage.PRESENT, 0, word(3))
        cam.write(Stage.NEXT, 0, word(4))
        cam.write(Stage.PRESENT, 1, word(3))
        cam.write(Stage.NEXT, 1, word(8))
        assert cam.search_both(word(3), word(8)).rows == [1]
        assert cam.search_both(word(4), word(8)).miss

    def test_confidence_must_fit(self) -> None:
        cam = CamUnit(SMALL)
        cam.write(Stage.CONFIDENCE, 0, 15)
        with pytest.raises(ContractViolation):
            cam.write(Stage.CONFIDENCE, 0, 16)

    def test_row_address_checked(self) -> None:
        cam = CamUnit(SMALL)
        with pytest.raises(CamAddressError):
            cam.write(Stage.PRESENT, SMALL.rows, word(0))

    def test_word_width_checked(self) -> None:
        cam = CamUnit(SMALL)
        with pytest.raises(ContractViolation):
            cam.write(Stage.PRESENT, 0, word(0, width=8))


class TestUpdate:
    def test_clears_and_frees_row(self) -> None:
        cam = CamUnit(SMALL)
        cam.write(Stage.PRESENT, 3, word(2))
        cam.write(Stage.CONFIDENCE, 3, 9)
        assert 3 not in cam.free_rows()
        cam.update(3)
        assert 3 in cam.free_rows()
        assert cam.peek_confidence(3) == 0
        assert cam.search(Stage.PRESENT, word(2)).miss

    def test_update_of_empty_row(self) -> None:
        with pytest.raises(CamAddressError):
            CamUnit(SMALL).update(0)


class TestMinMax:
    def load(self, counters: list[int]) -> CamUnit:
        cam = CamUnit(SMALL)
        for row, value in enumerate(counters):
            cam.write(Stage.CONFIDENCE, row, value)
        return cam

    def test_max_and_min(self) -> None:
        cam = self.load([3, 12, 5, 1])
        assert cam.min_max([0, 1, 2, 3], "max") == 1
        assert cam.min_max([0, 1, 2, 3], "min") == 3

    def test_ties_resolve_to_lowest_row(self) -> None:
        cam = self.load([3, 7, 7, 1])
        assert cam.min_max([0, 1, 2, 3], "max") == 1
        cam = self.load([4, 2, 9, 2])
        assert cam.min_max([3, 2, 1], "min") == 1

    def test_agrees_with_argmax_at_full_row_count(self, rng: np.random.Generator) -> None:
        cam = CamUnit(CamGeometry(n=1, m=1, p=128, q=8))
        for _ in range(20):
            counters = rng.integers(0, 256, size=128)
            for row, value in enumerate(counters):
                cam.write(Stage.CONFIDENCE, row, int(value))
            for _ in range(25):
                size = int(rng.integers(1, 129))
                rows = sorted(int(r) for r in rng.choice(128, size=size, replace=False))
                values = counters[rows]
                assert cam.min_max(rows, "max") == rows[int(np.argmax(values))]
                assert cam.min_max(rows, "min") == rows[int(np.argmin(values))]

    def test_needs_candidates(self) -> None:
        with pytest.raises(ContractViolation):
            CamUnit(SMALL).min_max([], "max")


class TestPredict:
    def test_reads_next_word(self) -> None:
        cam = CamUnit(SMALL)
        cam.write(Stage.PRESENT, 4, word(0))
        cam.write(Stage.NEXT, 4, word(2, 7, 15))
        np.testing.assert_array_equal(cam.predict(4), word(2, 7, 15))
        assert cam.ledger.predict_cycles == SMALL.q

    def test_invalid_row(self) -> None:
        with pytest.raises(CamAddressError):
            CamUnit(SMALL).predict(0)


class TestLedger:
    def test_write_cost_of_a_full_word(self) -> None:
        cam = CamUnit(CamGeometry())
        cam.write(Stage.PRESENT, 0, np.zeros(1024, dtype=bool))
        assert cam.ledger.latency_of("write") == pytest.approx(20.0)
        assert cam.ledger.energy_of("write") == pytest.approx(163.84)

    def test_operation_costs_accumulate(self) -> None:
        cam = CamUnit(SMALL)
        cam.write(Stage.PRESENT, 0, word(1))
        cam.write(Stage.CONFIDENCE, 0, 3)
        cam.search(Stage.PRESENT, word(1))
        cam.update(0)
        ledger = cam.ledger
        assert ledger.counts["write"] == 2
        assert ledger.bits["write"] == SMALL.word_width + SMALL.q
        assert ledger.counts["search"] == 1
        assert ledger.bits["update"] == SMALL.row_bits
        expected = 2 * 20.0 + 0.25 + 20.25
        assert ledger.latency_ns == pytest.approx(expected)
        expected_energy = sum(
            ledger.bits[op] * UNIT_COSTS[op].energy_fj_per_bit for op in UNIT_COSTS
        )
        assert ledger.energy_fj == pytest.approx(expected_energy)

    def test_save_and_load(self, tmp_path) -> None:
        ledger = CostLedger()
        ledger.charge("search", 1024)
        ledger.charge("predict", 1024)
        ledger.predict_cycles = 8
        ledger.save(tmp_path / "ledger.json")
        loaded = CostLedger.load(tmp_path / "ledger.json")
        assert loaded.as_dict() == ledger.as_dict()

    def test_unsupported_version(self, tmp_path) -> None:
        path = tmp_path / "ledger.json"
        path.write_text('{"version": 99}')
        with pytest.raises(SnapshotError):
            CostLedger.load(path)
