"""Functional and cost model of the three-stage CAM unit.

Each row spans three stages: a present-state word, a Q-bit confidence counter and a
next-state word. State words are n subarrays of Q bits each. Matchline analog behaviour is
abstracted to exact bit semantics; every micro-op is charged to a `CostLedger`.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Literal

import numpy as np

from .config import CamConfig
from .errors import CamAddressError, ContractViolation, SnapshotError

logger = logging.getLogger(__name__)

LEDGER_VERSION = 1


class Stage(str, Enum):
    PRESENT = "present"
    CONFIDENCE = "confidence"
    NEXT = "next"


@dataclass(frozen=True)
class OpCost:
    latency_ns: float
    energy_fj_per_bit: float


# Per-operation costs of the FeFET CAM array.
UNIT_COSTS: dict[str, OpCost] = {
    "write": OpCost(20.0, 0.16),
    "search": OpCost(0.25, 0.22),
    "update": OpCost(20.25, 0.54),
    "min_max": OpCost(1.2, 1.76),
    "predict": OpCost(2.3, 1.76),
}


@dataclass(frozen=True)
class CamGeometry:
    n: int = 128  # subarrays per array
    m: int = 16  # arrays per stage column
    p: int = 128  # rows per subarray
    q: int = 8  # bits per subarray row
    stages: int = 3

    def __post_init__(self) -> None:
        if min(self.n, self.m, self.p, self.q) < 1:
            raise ContractViolation(f"CAM geometry must be positive: {self}")

    @classmethod
    def from_config(cls, cfg: CamConfig) -> CamGeometry:
        return cls(n=cfg.n, m=cfg.m, p=cfg.p, q=cfg.q)

    @property
    def word_width(self) -> int:
        return self.n * self.q

    @property
    def rows(self) -> int:
        return self.m * self.p

    @property
    def confidence_max(self) -> int:
        return (1 << self.q) - 1

    @property
    def row_bits(self) -> int:
        return 2 * self.word_width + self.q


@dataclass
class CostLedger:
    """Operation counts and bits touched; totals are derived from the unit costs."""

    counts: dict[str, int] = field(default_factory=lambda: dict.fromkeys(UNIT_COSTS, 0))
    bits: dict[str, int] = field(default_factory=lambda: dict.fromkeys(UNIT_COSTS, 0))
    predict_cycles: int = 0

    def charge(self, op: str, bits: int) -> None:
        self.counts[op] += 1
        self.bits[op] += bits

    def latency_of(self, op: str) -> float:
        return self.counts[op] * UNIT_COSTS[op].latency_ns

    def energy_of(self, op: str) -> float:
        return self.bits[op] * UNIT_COSTS[op].energy_fj_per_bit

    @property
    def latency_ns(self) -> float:
        return sum(self.latency_of(op) for op in UNIT_COSTS)

    @property
    def energy_fj(self) -> float:
        return sum(self.energy_of(op) for op in UNIT_COSTS)

    def copy(self) -> CostLedger:
        return CostLedger(dict(self.counts), dict(self.bits), self.predict_cycles)

    def as_dict(self) -> dict[str, Any]:
        return {
            "version": LEDGER_VERSION,
            "operations": {
                op: {
                    "count": self.counts[op],
                    "bits": self.bits[op],
                    "latency_ns": self.latency_of(op),
                    "energy_fj": self.energy_of(op),
                }
                for op in UNIT_COSTS
            },
            "predict_cycles": self.predict_cycles,
            "total_latency_ns": self.latency_ns,
            "total_energy_fj": self.energy_fj,
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> CostLedger:
        if data.get("version") != LEDGER_VERSION:
            raise SnapshotError(f"cost ledger version {data.get('version')!r} not supported")
        ops = data["operations"]
        return cls(
            counts={op: int(ops[op]["count"]) for op in UNIT_COSTS},
            bits={op: int(ops[op]["bits"]) for op in UNIT_COSTS},
            predict_cycles=int(data["predict_cycles"]),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.as_dict(), f, indent=2)

    @classmethod
    def load(cls, path: str | Path) -> CostLedger:
        try:
            with open(path, "r", encoding="utf-8") as f:
                return cls.from_dict(json.load(f))
        except (OSError, json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
            raise SnapshotError(f"cost ledger {path}: {e}") from e


@dataclass(frozen=True)
class SearchResult:
    matches: np.ndarray  # bool per row
    miss: bool

    @property
    def rows(self) -> list[int]:
        return [int(r) for r in np.flatnonzero(self.matches)]


class CamUnit:
    """Three-stage CAM array with write, search, update, min/max and predict micro-ops."""

    def __init__(self, geometry: CamGeometry, ledger: CostLedger | None = None):
        self.geometry = geometry
        nbytes = math.ceil(geometry.word_width / 8)
        self._words = {
            Stage.PRESENT: np.zeros((geometry.rows, nbytes), dtype=np.uint8),
            Stage.NEXT: np.zeros((geometry.rows, nbytes), dtype=np.uint8),
        }
        self._confidence = np.zeros(geometry.rows, dtype=np.uint32)
        self.valid = np.zeros(geometry.rows, dtype=bool)
        self.ledger = ledger if ledger is not None else CostLedger()

    def _check_row(self, row: int) -> None:
        if not 0 <= row < self.geometry.rows:
            raise CamAddressError(f"row {row} outside [0, {self.geometry.rows})")

    def _pack(self, word: np.ndarray) -> np.ndarray:
        bits = np.asarray(word, dtype=bool).ravel()
        if bits.size != self.geometry.word_width:
            raise ContractViolation(
                f"word width {bits.size} != CAM word width {self.geometry.word_width}"
            )
        return np.packbits(bits)

    def write(self, stage: Stage, row: int, word: np.ndarray | int) -> None:
        """Store `word` in one stage of `row`; writing the present stage validates the row."""
        self._check_row(row)
        if stage is Stage.CONFIDENCE:
            value = int(word)
            if not 0 <= value <= self.geometry.confidence_max:
                raise ContractViolation(f"confidence {value} does not fit in {self.geometry.q} bits")
            self._confidence[row] = value
            self.ledger.charge("write", self.geometry.q)
            return
        self._words[stage][row] = self._pack(word)
        if stage is Stage.PRESENT:
            self.valid[row] = True
        self.ledger.charge("write", self.geometry.word_width)

    def _mismatch(self, stage: Stage, query: np.ndarray) -> np.ndarray:
        if stage is Stage.CONFIDENCE:
            raise ContractViolation("the confidence stage is not content-searched")
        q = self._pack(query)
        stored = self._words[stage]
        # pre-search catches stored 1 / searched 0, the search phase stored 0 / searched 1
        pre = (stored & ~q).any(axis=1)
        post = (~stored & q).any(axis=1)
        self.ledger.charge("search", self.geometry.word_width)
        return pre | post

    def search(self, stage: Stage, query: np.ndarray) -> SearchResult:
        matches = self.valid & ~self._mismatch(stage, query)
        return SearchResult(matches, not matches.any())

    def search_both(self, present: np.ndarray, next_word: np.ndarray) -> SearchResult:
        """Search the present and next stages at once; a row matches only if both do."""
        mismatch = self._mismatch(Stage.PRESENT, present) | self._mismatch(Stage.NEXT, next_word)
        matches = self.valid & ~mismatch
        return SearchResult(matches, not matches.any())

    def update(self, row: int) -> None:
        """Clear a row to zeros and release it for reuse."""
        self._check_row(row)
        if not self.valid[row]:
            raise CamAddressError(f"row {row} holds no valid entry")
        self._words[Stage.PRESENT][row] = 0
        self._words[Stage.NEXT][row] = 0
        self._confidence[row] = 0
        self.valid[row] = False
        self.ledger.charge("update", self.geometry.row_bits)

    def min_max(self, rows: list[int], mode: Literal["max", "min"] = "max") -> int:
        """Bitwise MSB-to-LSB search over the confidence counters of `rows`.

        At each bit the rows that lose (store 0 for max, 1 for min) drop out whenever some
        row wins; the priority encoder resolves what remains to the lowest address.
        """
        if not rows:
            raise ContractViolation("min/max needs at least one candidate row")
        for row in rows:
            self._check_row(row)
        candidates = np.array(sorted(set(rows)), dtype=np.int64)
        self.ledger.charge("min_max", self.geometry.q * len(candidates))
        wanted = 1 if mode == "max" else 0
        for bit in range(self.geometry.q - 1, -1, -1):
            if len(candidates) == 1:
                break
            column = (self._confidence[candidates] >> bit) & 1
            keep = column == wanted
            if keep.any():
                candidates = candidates[keep]
        return int(candidates[0])

    def predict(self, row: int) -> np.ndarray:
        """Read the next-state word out over Q cycles, one bit per subarray per cycle."""
        self._check_row(row)
        if not self.valid[row]:
            raise CamAddressError(f"row {row} holds no valid entry")
        n, q = self.geometry.n, self.geometry.q
        stored = np.unpackbits(self._words[Stage.NEXT][row])[: n * q].astype(bool).reshape(n, q)
        sipo = np.zeros((n, q), dtype=bool)
        for cycle in range(q):
            sipo[:, cycle] = stored[:, cycle]
        self.ledger.charge("predict", self.geometry.word_width)
        self.ledger.predict_cycles += q
        return sipo.reshape(-1)

    def peek_confidence(self, row: int) -> int:
        """Host-side read of a counter; not a CAM operation and not charged."""
        return int(self._confidence[row])

    def free_rows(self) -> np.ndarray:
        return np.flatnonzero(~self.valid)
