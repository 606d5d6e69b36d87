"""Reflex memory: a bounded first-order transition table.

Each present state maps to its observed successors with recurrence counts; a lookup
predicts the most frequent successor. `ReflexBackend` is the contract shared by the
software table below and the CAM-backed implementation in `cam_reflex`.
"""

from __future__ import annotations

import heapq
import json
import logging
from abc import ABC, abstractmethod
from collections.abc import Callable, Hashable, Iterable, Iterator
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal

from .errors import ContractViolation, SnapshotError
from .sdr import Fingerprint, Sdr, fingerprint

logger = logging.getLogger(__name__)

Granularity = Literal["pair", "entry"]
PairKey = tuple[Fingerprint, Fingerprint]


@dataclass
class Successor:
    next: Sdr
    count: int = 0
    last_seen: int = 0  # stamp of the latest observation of this transition
    last_access: int = 0  # stamp of the latest lookup or observation touching it


@dataclass
class ReflexEntry:
    present: Sdr
    successors: dict[Fingerprint, Successor] = field(default_factory=dict)
    last_access: int = 0

    @property
    def total_count(self) -> int:
        return sum(s.count for s in self.successors.values())


@dataclass
class ReflexStats:
    hits: int = 0
    misses: int = 0
    evictions: int = 0
    size: int = 0

    def as_dict(self) -> dict[str, int]:
        return {"hits": self.hits, "misses": self.misses,
                "evictions": self.evictions, "size": self.size}


def pick_prediction(candidates: Iterable[Any], count: Callable[[Any], int],
                    last_seen: Callable[[Any], int],
                    next_fp: Callable[[Any], Fingerprint]) -> Any:
    """Highest count wins, then the most recently observed, then the lowest fingerprint."""
    items = list(candidates)
    top = max((count(c), last_seen(c)) for c in items)
    return min((c for c in items if (count(c), last_seen(c)) == top), key=next_fp)


class VictimQueue:
    """Min-heap of eviction keys with lazy invalidation.

    Every change to an item's key pushes a fresh tuple; stale tuples are discarded when
    popped because they no longer equal the item's current key.
    """

    def __init__(self) -> None:
        self._heap: list[tuple[Any, ...]] = []

    def __len__(self) -> int:
        return len(self._heap)

    def push(self, key: tuple[Any, ...]) -> None:
        heapq.heappush(self._heap, key)

    def pop_valid(self, current: Callable[[tuple[Any, ...]], tuple[Any, ...] | None]) -> tuple:
        while self._heap:
            key = heapq.heappop(self._heap)
            if current(key) == key:
                return key
        raise ContractViolation("no eviction candidate available")

    def rebuild(self, keys: Iterable[tuple[Any, ...]]) -> None:
        self._heap = list(keys)
        heapq.heapify(self._heap)


class ReflexBackend(ABC):
    """Operations every reflex memory implementation provides.

    Implementations must behave identically for identical operation streams.
    """

    capacity: int
    stats: ReflexStats

    @abstractmethod
    def lookup_predict(self, present: Sdr, touch: bool = True) -> Sdr | None:
        """Most frequent successor of `present`; `touch=False` leaves recency stamps alone."""

    @abstractmethod
    def observe(self, present: Sdr, next_state: Sdr) -> None: ...

    @abstractmethod
    def decrement(self, present: Sdr, wrong_next: Sdr) -> None: ...

    @abstractmethod
    def evict_one(self) -> Hashable: ...

    @abstractmethod
    def entries(self) -> Iterator[ReflexEntry]:
        """Snapshot view of the stored transitions, grouped by present state."""

    def retrain(self, present: Sdr, correct_next: Sdr) -> None:
        """Align the table with a confirmed transition; same contract as `observe`."""
        self.observe(present, correct_next)

    def __len__(self) -> int:
        return self.stats.size

    def dump(self, path: str | Path) -> None:
        """Write one JSON line per present state."""
        with open(path, "w", encoding="utf-8") as f:
            for entry in self.entries():
                f.write(json.dumps(entry_to_record(entry)) + "\n")


def entry_to_record(entry: ReflexEntry) -> dict[str, Any]:
    return {
        "present": str(entry.present),
        "last_access": entry.last_access,
        "successors": [
            {"next": str(s.next), "count": s.count, "last_seen": s.last_seen,
             "last_access": s.last_access}
            for s in entry.successors.values()
        ],
    }


def read_records(path: str | Path) -> list[ReflexEntry]:
    """Parse a JSON-lines dump back into entries."""
    entries: list[ReflexEntry] = []
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                record = json.loads(line)
                entry = ReflexEntry(Sdr.parse(record["present"]),
                                    last_access=int(record["last_access"]))
                for item in record["successors"]:
                    succ = Successor(Sdr.parse(item["next"]), int(item["count"]),
                                     int(item["last_seen"]), int(item["last_access"]))
                    if succ.count < 1:
                        raise ValueError(f"line {line_no}: count must be >= 1")
                    entry.successors[fingerprint(succ.next)] = succ
                entries.append(entry)
    except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        raise SnapshotError(f"reflex memory dump {path}: {e}") from e
    return entries


class SoftwareTable(ReflexBackend):
    """Dictionary-backed reflex memory.

    With `granularity="pair"` capacity counts (present, next) transitions and eviction
    removes one transition; with `"entry"` it counts present states and evicts whole entries.
    Victims are the lowest recurrence count, then the oldest access.
    """

    def __init__(
        self,
        capacity: int = 2048,
        granularity: Granularity = "pair",
        count_limit: int | None = None,
    ):
        if capacity < 1:
            raise ContractViolation("reflex memory capacity must be positive")
        self.capacity = capacity
        self.granularity = granularity
        self.count_limit = count_limit
        self.table: dict[Fingerprint, ReflexEntry] = {}
        self.step_clock = 0
        self.stats = ReflexStats()
        self._pairs = 0
        self._victims = VictimQueue()

    def _tick(self) -> int:
        self.step_clock += 1
        return self.step_clock

    def _size(self) -> int:
        return self._pairs if self.granularity == "pair" else len(self.table)

    def _entry_key(self, key: Fingerprint) -> tuple[Any, ...]:
        entry = self.table[key]
        return (entry.total_count, entry.last_access, key)

    def _pair_key(self, key: Fingerprint, next_key: Fingerprint) -> tuple[Any, ...]:
        succ = self.table[key].successors[next_key]
        return (succ.count, succ.last_access, key, next_key)

    def _current(self, queued: tuple[Any, ...]) -> tuple[Any, ...] | None:
        if self.granularity == "entry":
            key = queued[2]
            return self._entry_key(key) if key in self.table else None
        key, next_key = queued[2], queued[3]
        entry = self.table.get(key)
        if entry is None or next_key not in entry.successors:
            return None
        return self._pair_key(key, next_key)

    def _requeue(self, key: Fingerprint, next_keys: Iterable[Fingerprint]) -> None:
        if self.granularity == "entry":
            self._victims.push(self._entry_key(key))
        else:
            for next_key in next_keys:
                self._victims.push(self._pair_key(key, next_key))
        if len(self._victims) > 8 * self.capacity + 64:
            self._victims.rebuild(self._all_keys())

    def _all_keys(self) -> Iterator[tuple[Any, ...]]:
        for key, entry in self.table.items():
            if self.granularity == "entry":
                yield self._entry_key(key)
            else:
                for next_key in entry.successors:
                    yield self._pair_key(key, next_key)

    def lookup_predict(self, present: Sdr, touch: bool = True) -> Sdr | None:
        key = fingerprint(present)
        entry = self.table.get(key)
        if entry is None:
            self.stats.misses += 1
            return None
        if touch:
            stamp = self._tick()
            entry.last_access = stamp
            for succ in entry.successors.values():
                succ.last_access = stamp
            self._requeue(key, entry.successors)
        self.stats.hits += 1
        best = pick_prediction(
            entry.successors.values(),
            count=lambda s: s.count,
            last_seen=lambda s: s.last_seen,
            next_fp=lambda s: fingerprint(s.next),
        )
        return best.next

    def observe(self, present: Sdr, next_state: Sdr) -> None:
        if present.width != next_state.width:
            raise ContractViolation("present and next states differ in width")
        stamp = self._tick()
        key, next_key = fingerprint(present), fingerprint(next_state)
        entry = self.table.get(key)
        if entry is None or (self.granularity == "pair" and next_key not in entry.successors):
            while self._size() >= self.capacity:
                self.evict_one()
            entry = self.table.get(key)
        if entry is None:
            entry = self.table[key] = ReflexEntry(present)
        succ = entry.successors.get(next_key)
        if succ is None:
            succ = entry.successors[next_key] = Successor(next_state)
            self._pairs += 1
        succ.count += 1
        if self.count_limit is not None:
            succ.count = min(succ.count, self.count_limit)
        succ.last_seen = succ.last_access = entry.last_access = stamp
        self._requeue(key, [next_key])
        self.stats.size = self._size()

    def decrement(self, present: Sdr, wrong_next: Sdr) -> None:
        key, next_key = fingerprint(present), fingerprint(wrong_next)
        entry = self.table.get(key)
        succ = entry.successors.get(next_key) if entry else None
        if succ is None:
            logger.warning("Decrement of unknown transition %s -> %s ignored", present, wrong_next)
            return
        succ.count = max(1, succ.count - 1)
        self._requeue(key, [next_key])

    def evict_one(self) -> PairKey | Fingerprint:
        """Remove the least frequent, least recently used transition (or entry)."""
        if not self.table:
            raise ContractViolation("cannot evict from an empty reflex memory")
        queued = self._victims.pop_valid(self._current)
        if self.granularity == "entry":
            key = queued[2]
            self._pairs -= len(self.table.pop(key).successors)
            victim: PairKey | Fingerprint = key
        else:
            key, next_key = queued[2], queued[3]
            entry = self.table[key]
            del entry.successors[next_key]
            self._pairs -= 1
            if not entry.successors:
                del self.table[key]
            victim = (key, next_key)
        self.stats.evictions += 1
        self.stats.size = self._size()
        logger.debug("Evicted %s", victim)
        return victim

    def entries(self) -> Iterator[ReflexEntry]:
        return iter(list(self.table.values()))

    def restore(self, path: str | Path) -> None:
        entries = read_records(path)
        self.table = {fingerprint(e.present): e for e in entries}
        self._pairs = sum(len(e.successors) for e in entries)
        if self._size() > self.capacity:
            raise SnapshotError(f"dump holds {self._size()} items, capacity {self.capacity}")
        self.step_clock = max(
            [e.last_access for e in entries]
            + [s.last_seen for e in entries for s in e.successors.values()]
            + [0]
        )
        self._victims.rebuild(self._all_keys())
        self.stats.size = self._size()
