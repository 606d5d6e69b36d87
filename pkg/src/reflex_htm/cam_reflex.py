"""Reflex memory mapped onto the CAM unit.

One (present, next) transition occupies one CAM row; the confidence stage holds its
recurrence count. The host keeps what the array does not store (access stamps and the
decoded SDRs) and drives confidence increments and eviction scans.
"""

from __future__ import annotations

import logging
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .cam import CamGeometry, CamUnit, CostLedger, Stage
from .errors import ContractViolation, SnapshotError
from .reflex_memory import (
    PairKey,
    ReflexBackend,
    ReflexEntry,
    ReflexStats,
    Successor,
    VictimQueue,
    pick_prediction,
    read_records,
)
from .sdr import Fingerprint, Sdr, fingerprint

logger = logging.getLogger(__name__)

PENDING: tuple = ()


@dataclass
class RowMeta:
    present: Sdr
    next: Sdr | None  # None while the row waits for its next state
    last_seen: int = 0
    last_access: int = 0


class CamReflexMemory(ReflexBackend):
    """`ReflexBackend` whose storage and lookups run on a simulated CAM.

    Behaves exactly like `SoftwareTable(capacity, "pair", 2**q - 1)`; every micro-op is
    charged to `cam.ledger`.
    """

    def __init__(
        self,
        geometry: CamGeometry,
        capacity: int | None = None,
        ledger: CostLedger | None = None,
    ):
        self.cam = CamUnit(geometry, ledger)
        self.capacity = geometry.rows if capacity is None else capacity
        if not 1 <= self.capacity <= geometry.rows:
            raise ContractViolation(f"capacity {self.capacity} outside [1, {geometry.rows}]")
        self.count_limit = geometry.confidence_max
        self.rows: dict[int, RowMeta] = {}
        self.pending: dict[Fingerprint, int] = {}
        self.step_clock = 0
        self.stats = ReflexStats()
        self._victims = VictimQueue()

    @property
    def geometry(self) -> CamGeometry:
        return self.cam.geometry

    @property
    def ledger(self) -> CostLedger:
        return self.cam.ledger

    def _tick(self) -> int:
        self.step_clock += 1
        return self.step_clock

    def _check(self, sdr: Sdr) -> None:
        if sdr.width != self.geometry.word_width:
            raise ContractViolation(
                f"SDR width {sdr.width} != CAM word width {self.geometry.word_width}"
            )

    def _key(self, row: int) -> tuple[Any, ...]:
        meta = self.rows[row]
        next_fp = PENDING if meta.next is None else fingerprint(meta.next)
        return (self.cam.peek_confidence(row), meta.last_access, fingerprint(meta.present),
                next_fp, row)

    def _current(self, queued: tuple[Any, ...]) -> tuple[Any, ...] | None:
        row = queued[-1]
        return self._key(row) if row in self.rows else None

    def _requeue(self, rows: list[int]) -> None:
        for row in rows:
            self._victims.push(self._key(row))
        if len(self._victims) > 8 * self.capacity + 64:
            self._victims.rebuild(self._key(row) for row in self.rows)

    def _matched(self, present: Sdr) -> list[int]:
        result = self.cam.search(Stage.PRESENT, present.dense())
        return [row for row in result.rows if self.rows[row].next is not None]

    def _allocate(self, present: Sdr) -> int:
        while len(self.rows) >= self.capacity:
            self.evict_one()
        row = int(self.cam.free_rows()[0])
        self.cam.write(Stage.PRESENT, row, present.dense())
        self.rows[row] = RowMeta(present, None)
        logger.debug("Allocated CAM row %d", row)
        return row

    def _size(self) -> int:
        return len(self.rows)

    def lookup_predict(self, present: Sdr, touch: bool = True) -> Sdr | None:
        self._check(present)
        matched = self._matched(present)
        if not matched:
            self.stats.misses += 1
            return None
        if touch:
            stamp = self._tick()
            for row in matched:
                self.rows[row].last_access = stamp
            self._requeue(matched)
        self.stats.hits += 1
        if len(matched) == 1:
            row = matched[0]
        else:
            row = self.cam.min_max(matched, "max")
            top = self.cam.peek_confidence(row)
            tied = [r for r in matched if self.cam.peek_confidence(r) == top]
            if len(tied) > 1:
                # equal counters: the host picks by recency, then fingerprint
                row = pick_prediction(
                    tied,
                    count=self.cam.peek_confidence,
                    last_seen=lambda r: self.rows[r].last_seen,
                    next_fp=lambda r: fingerprint(self.rows[r].next),
                )
        return Sdr.from_dense(self.cam.predict(row))

    def observe(self, present: Sdr, next_state: Sdr) -> None:
        self._check(present)
        self._check(next_state)
        stamp = self._tick()
        result = self.cam.search_both(present.dense(), next_state.dense())
        found = [row for row in result.rows if self.rows[row].next is not None]
        if found:
            row = found[0]
            count = min(self.cam.peek_confidence(row) + 1, self.count_limit)
        else:
            row = self.pending.pop(fingerprint(present), None)
            if row is None:
                row = self._allocate(present)
            self.cam.write(Stage.NEXT, row, next_state.dense())
            self.rows[row].next = next_state
            count = 1
        self.cam.write(Stage.CONFIDENCE, row, count)
        meta = self.rows[row]
        meta.last_seen = meta.last_access = stamp
        self._requeue([row])
        self.stats.size = self._size()

    def decrement(self, present: Sdr, wrong_next: Sdr) -> None:
        self._check(present)
        self._check(wrong_next)
        result = self.cam.search_both(present.dense(), wrong_next.dense())
        found = [row for row in result.rows if self.rows[row].next is not None]
        if not found:
            logger.warning("Decrement of unknown transition %s -> %s ignored", present, wrong_next)
            return
        row = found[0]
        self.cam.write(Stage.CONFIDENCE, row, max(1, self.cam.peek_confidence(row) - 1))
        self._requeue([row])

    def evict_one(self) -> PairKey | tuple[Fingerprint, tuple]:
        """Host scan for the lowest count, oldest access row; cleared with an update."""
        if not self.rows:
            raise ContractViolation("cannot evict from an empty reflex memory")
        count, _, present_fp, next_fp, row = self._victims.pop_valid(self._current)
        self.cam.update(row)
        meta = self.rows.pop(row)
        if meta.next is None:
            self.pending.pop(present_fp, None)
        self.stats.evictions += 1
        self.stats.size = self._size()
        logger.debug("Evicted CAM row %d (count %d)", row, count)
        return (present_fp, next_fp)

    def rm_step_mapped(self, present: Sdr, provide_next: Sdr | None = None) -> Sdr | None:
        """Present-state processing as the hardware controller runs it.

        A hit predicts directly; a miss writes the present word to a free row, which is
        completed when the next state arrives (now via `provide_next`, or by a later
        `observe` of the same present state).
        """
        self._check(present)
        prediction = self.lookup_predict(present)
        key = fingerprint(present)
        if prediction is None and key not in self.pending:
            self.pending[key] = self._allocate(present)
            self.rows[self.pending[key]].last_access = self._tick()
            self._requeue([self.pending[key]])
            self.stats.size = self._size()
        if provide_next is not None:
            self.observe(present, provide_next)
        return prediction

    def entries(self) -> Iterator[ReflexEntry]:
        grouped: dict[Fingerprint, ReflexEntry] = {}
        for row in sorted(self.rows):
            meta = self.rows[row]
            if meta.next is None:
                continue
            entry = grouped.setdefault(fingerprint(meta.present), ReflexEntry(meta.present))
            entry.successors[fingerprint(meta.next)] = Successor(
                meta.next, self.cam.peek_confidence(row), meta.last_seen, meta.last_access
            )
            entry.last_access = max(entry.last_access, meta.last_access)
        return iter(list(grouped.values()))

    def restore(self, path: str | Path) -> None:
        """Reload a dump by writing its rows; the writes are charged to the ledger."""
        entries = read_records(path)
        pairs = sum(len(e.successors) for e in entries)
        if pairs > self.capacity:
            raise SnapshotError(f"dump holds {pairs} items, capacity {self.capacity}")
        for row in list(self.rows):
            self.cam.update(row)
        self.rows.clear()
        self.pending.clear()
        for entry in entries:
            self._check(entry.present)
            for succ in entry.successors.values():
                row = self._allocate(entry.present)
                self.cam.write(Stage.NEXT, row, succ.next.dense())
                self.cam.write(Stage.CONFIDENCE, row, min(succ.count, self.count_limit))
                self.rows[row] = RowMeta(entry.present, succ.next, succ.last_seen,
                                         succ.last_access)
        self.step_clock = max(
            [m.last_access for m in self.rows.values()]
            + [m.last_seen for m in self.rows.values()]
            + [0]
        )
        self._victims.rebuild(self._key(row) for row in self.rows)
        self.stats.size = self._size()
