import numpy as np
import pytest

from reflex_htm.cam import CamGeometry
from reflex_htm.cam_reflex import CamReflexMemory
from reflex_htm.errors import ContractViolation
from reflex_htm.reflex_memory import SoftwareTable
from reflex_htm.sdr import Sdr, fingerprint
from reflex_htm.selftest import record_victims

GEOMETRY = CamGeometry(n=4, m=2, p=8, q=8)  # 32-bit words, 16 rows


def state(i: int) -> Sdr:
    return Sdr.of(32, [i % 32, (i + 5) % 32, (i + 11) % 32])


P, A, B, C = (state(i) for i in range(4))


def test_capacity_bounded_by_rows() -> None:
    assert CamReflexMemory(GEOMETRY).capacity == 16
    with pytest.raises(ContractViolation):
        CamReflexMemory(GEOMETRY, capacity=17)


def test_width_must_match_word() -> None:
    with pytest.raises(ContractViolation):
        CamReflexMemory(GEOMETRY).lookup_predict(Sdr.of(64, [1]))


def test_unique_match_skips_min_max() -> None:
    rm = CamReflexMemory(GEOMETRY)
    rm.observe(P, A)
    assert rm.lookup_predict(P) == A
    assert rm.ledger.counts["min_max"] == 0
    assert rm.ledger.counts["predict"] == 1


def test_several_successors_use_min_max() -> None:
    rm = CamReflexMemory(GEOMETRY)
    rm.observe(P, A)
    rm.observe(P, B)
    rm.observe(P, B)
    assert rm.lookup_predict(P) == B
    assert rm.ledger.counts["min_max"] == 1


def test_counter_saturates_at_confidence_max() -> None:
    rm = CamReflexMemory(CamGeometry(n=4, m=1, p=4, q=2))
    for _ in range(10):
        rm.observe(Sdr.of(8, [1, 2]), Sdr.of(8, [5]))
    (row,) = rm.rows
    assert rm.cam.peek_confidence(row) == 3


def test_decrement_floors_at_one() -> None:
    rm = CamReflexMemory(GEOMETRY)
    rm.observe(P, A)
    rm.observe(P, A)
    rm.decrement(P, A)
    rm.decrement(P, A)
    (row,) = rm.rows
    assert rm.cam.peek_confidence(row) == 1


def test_eviction_clears_row() -> None:
    rm = CamReflexMemory(GEOMETRY, capacity=2)
    rm.observe(P, A)
    rm.observe(P, A)
    rm.observe(B, C)
    rm.observe(C, P)
    assert rm.stats.evictions == 1
    assert rm.lookup_predict(B) is None
    assert rm.ledger.counts["update"] == 1
    assert len(rm) == 2


def test_mapped_step_allocates_pending_row() -> None:
    rm = CamReflexMemory(GEOMETRY)
    assert rm.rm_step_mapped(P) is None
    assert fingerprint(P) in rm.pending
    assert rm.lookup_predict(P) is None
    rm.observe(P, A)
    assert len(rm.rows) == 1
    assert not rm.pending
    assert rm.lookup_predict(P) == A


def test_mapped_step_with_next_state() -> None:
    rm = CamReflexMemory(GEOMETRY)
    assert rm.rm_step_mapped(P, provide_next=A) is None
    assert rm.rm_step_mapped(P, provide_next=A) == A
    assert len(rm.rows) == 1


def test_pending_row_is_evictable() -> None:
    rm = CamReflexMemory(GEOMETRY, capacity=2)
    rm.observe(P, A)
    rm.observe(P, A)
    rm.rm_step_mapped(B)
    rm.observe(C, P)
    assert fingerprint(B) not in rm.pending
    assert len(rm.rows) == 2


def test_matches_software_table(rng: np.random.Generator) -> None:
    software = SoftwareTable(capacity=10, granularity="pair", count_limit=255)
    hardware = CamReflexMemory(GEOMETRY, capacity=10)
    software_victims, hardware_victims = record_victims(software), record_victims(hardware)
    states = [state(i) for i in range(9)]
    seen: list[tuple[Sdr, Sdr]] = []
    for _ in range(2000):
        a, b = states[rng.integers(9)], states[rng.integers(9)]
        op = rng.random()
        if op < 0.45 or not seen:
            software.observe(a, b)
            hardware.observe(a, b)
            seen.append((a, b))
        elif op < 0.55:
            a, b = seen[rng.integers(len(seen))]
            software.decrement(a, b)
            hardware.decrement(a, b)
        else:
            assert software.lookup_predict(a) == hardware.lookup_predict(a)
        assert len(software) == len(hardware)
    assert software.stats.as_dict() == hardware.stats.as_dict()
    assert software_victims == hardware_victims
    assert len(software_victims) == software.stats.evictions > 0


def test_dump_and_restore(tmp_path) -> None:
    rm = CamReflexMemory(GEOMETRY)
    rm.observe(P, A)
    rm.observe(P, B)
    rm.observe(P, B)
    rm.dump(tmp_path / "rm.jsonl")
    restored = CamReflexMemory(GEOMETRY)
    restored.restore(tmp_path / "rm.jsonl")
    assert len(restored) == 2
    assert restored.lookup_predict(P) == B
    assert restored.ledger.counts["write"] == 6
