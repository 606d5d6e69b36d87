"""Sequence memory: cells in mini-columns predicting the next input through distal segments.

Cells are addressed by a flat index `column * cells_per_column + cell`. Each segment keeps
three parallel lists: the presynaptic cells (`parents`), their permanences (`perms`) and the
connected flags (`on`, always `perm >= synapse_connect_threshold` after an update).
"""

from __future__ import annotations

import json
import logging
from collections.abc import Iterable
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .config import SmConfig
from .errors import ContractViolation, SnapshotError
from .sdr import Sdr

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1


@dataclass(eq=False)
class Segment:
    uid: int
    cell: int
    parents: list[int] = field(default_factory=list)
    perms: list[float] = field(default_factory=list)
    on: list[bool] = field(default_factory=list)
    last_used: int = 0

    def __len__(self) -> int:
        return len(self.parents)


def segment_activity(seg: Segment, active_cells: Iterable[int] | set[int], theta: float) -> int:
    """Count synapses that are connected, at or above `theta`, and fed by an active cell."""
    active = active_cells if isinstance(active_cells, (set, frozenset)) else set(active_cells)
    return sum(
        1
        for parent, perm, on in zip(seg.parents, seg.perms, seg.on)
        if on and perm >= theta and parent in active
    )


class TemporalNetwork:
    """Mini-columns x cells with their distal segments, plus a presynaptic index."""

    def __init__(self, columns: int, cfg: SmConfig):
        self.columns = columns
        self.cells_per_column = cfg.cells_per_column
        self.cfg = cfg
        self.segments: list[list[Segment]] = [[] for _ in range(columns * cfg.cells_per_column)]
        self._presyn: dict[int, dict[int, Segment]] = {}
        self._next_uid = 0

    @property
    def cell_count(self) -> int:
        return self.columns * self.cells_per_column

    def column_of(self, cell: int) -> int:
        return cell // self.cells_per_column

    def cells_of(self, column: int) -> range:
        start = column * self.cells_per_column
        return range(start, start + self.cells_per_column)

    def segment_count(self) -> int:
        return sum(len(segs) for segs in self.segments)

    def synapse_count(self) -> int:
        return sum(len(seg) for segs in self.segments for seg in segs)

    def iter_segments(self) -> Iterable[Segment]:
        for segs in self.segments:
            yield from segs

    def create_segment(self, cell: int, stamp: int) -> Segment:
        cell_segments = self.segments[cell]
        if len(cell_segments) >= self.cfg.max_segments:
            oldest = min(cell_segments, key=lambda s: (s.last_used, s.uid))
            self.destroy_segment(oldest)
        seg = Segment(uid=self._next_uid, cell=cell, last_used=stamp)
        self._next_uid += 1
        cell_segments.append(seg)
        return seg

    def destroy_segment(self, seg: Segment) -> None:
        for parent in seg.parents:
            self._unindex(parent, seg)
        self.segments[seg.cell].remove(seg)
        logger.debug("Destroyed segment %d on cell %d", seg.uid, seg.cell)

    def add_synapse(self, seg: Segment, parent: int, perm: float) -> None:
        perm = min(max(perm, 0.0), 1.0)
        seg.parents.append(parent)
        seg.perms.append(perm)
        seg.on.append(perm >= self.cfg.synapse_connect_threshold)
        self._presyn.setdefault(parent, {})[seg.uid] = seg

    def remove_synapse(self, seg: Segment, index: int) -> None:
        parent = seg.parents.pop(index)
        seg.perms.pop(index)
        seg.on.pop(index)
        self._unindex(parent, seg)

    def _unindex(self, parent: int, seg: Segment) -> None:
        targets = self._presyn.get(parent)
        if targets is not None:
            targets.pop(seg.uid, None)
            if not targets:
                del self._presyn[parent]

    def segments_fed_by(self, cell: int) -> Iterable[Segment]:
        return self._presyn.get(cell, {}).values()

    def adapt(self, seg: Segment, active_cells: set[int], inc: float, dec: float) -> None:
        """LTP toward `active_cells`, LTD elsewhere; clamp, refresh flags, drop dead synapses."""
        threshold = self.cfg.synapse_connect_threshold
        for i, parent in enumerate(seg.parents):
            delta = inc if parent in active_cells else -dec
            perm = min(max(seg.perms[i] + delta, 0.0), 1.0)
            seg.perms[i] = perm
            seg.on[i] = perm >= threshold
        for i in reversed(range(len(seg.parents))):
            if seg.perms[i] <= 0.0:
                self.remove_synapse(seg, i)

    def punish(self, seg: Segment, active_cells: set[int], dec: float) -> None:
        """LTD only on the synapses fed by `active_cells`."""
        threshold = self.cfg.synapse_connect_threshold
        for i, parent in enumerate(seg.parents):
            if parent in active_cells:
                perm = max(seg.perms[i] - dec, 0.0)
                seg.perms[i] = perm
                seg.on[i] = perm >= threshold
        for i in reversed(range(len(seg.parents))):
            if seg.perms[i] <= 0.0:
                self.remove_synapse(seg, i)

    def check_consistency(self) -> None:
        """Raise ContractViolation when a structural invariant is broken."""
        threshold = self.cfg.synapse_connect_threshold
        for cell, segs in enumerate(self.segments):
            if len(segs) > self.cfg.max_segments:
                raise ContractViolation(f"cell {cell} holds {len(segs)} segments")
            for seg in segs:
                if not len(seg.parents) == len(seg.perms) == len(seg.on):
                    raise ContractViolation(f"segment {seg.uid} has ragged synapse lists")
                if len(seg) > self.cfg.max_synapses:
                    raise ContractViolation(f"segment {seg.uid} holds {len(seg)} synapses")
                for perm, on in zip(seg.perms, seg.on):
                    if not 0.0 <= perm <= 1.0 or on != (perm >= threshold):
                        raise ContractViolation(f"segment {seg.uid} permanence/flag mismatch")

    def to_dict(self) -> dict[str, Any]:
        return {
            "version": SNAPSHOT_VERSION,
            "columns": self.columns,
            "cells_per_column": self.cells_per_column,
            "next_uid": self._next_uid,
            "segments": [
                {
                    "uid": seg.uid,
                    "cell": seg.cell,
                    "last_used": seg.last_used,
                    "parents": list(seg.parents),
                    "perms": list(seg.perms),
                }
                for seg in self.iter_segments()
            ],
        }

    @classmethod
    def from_dict(cls, data: dict[str, Any], cfg: SmConfig) -> TemporalNetwork:
        try:
            if data["version"] != SNAPSHOT_VERSION:
                raise SnapshotError(f"sequence memory snapshot version {data['version']}")
            if data["cells_per_column"] != cfg.cells_per_column:
                raise SnapshotError("sequence memory snapshot has a different cells_per_column")
            net = cls(int(data["columns"]), cfg)
            for item in data["segments"]:
                seg = Segment(uid=int(item["uid"]), cell=int(item["cell"]),
                              last_used=int(item["last_used"]))
                net.segments[seg.cell].append(seg)
                for parent, perm in zip(item["parents"], item["perms"]):
                    net.add_synapse(seg, int(parent), float(perm))
            net._next_uid = int(data["next_uid"])
        except (KeyError, TypeError, ValueError, IndexError) as e:
            raise SnapshotError(f"malformed sequence memory snapshot: {e}") from e
        return net


@dataclass(frozen=True)
class Predictions:
    """Outcome of scoring every segment against one set of active cells."""

    predictive_cells: dict[int, int]  # cell -> Dwinner (best active-segment count)
    best_segment: dict[int, Segment]  # predictive cell -> its best active segment
    active_segments: dict[int, list[Segment]]  # predictive cell -> all its active segments
    matching: dict[int, tuple[int, Segment]]  # column -> (potential count, best matching seg)
    predicted_columns: Sdr


@dataclass(frozen=True)
class SmStepOutput:
    predicted_columns: Sdr
    active_cells: frozenset[int]
    predictive_cells: frozenset[int]
    learning_cells: frozenset[int]
    bursting_columns: frozenset[int]


class SequenceMemory:
    """Runs the activate -> learn -> predict cycle over one stream of column SDRs."""

    def __init__(self, columns: int, cfg: SmConfig):
        self.cfg = cfg
        self.net = TemporalNetwork(columns, cfg)
        self.rng = np.random.default_rng(cfg.seed)
        self.iteration = 0
        self.reset()

    @property
    def columns(self) -> int:
        return self.net.columns

    def reset(self) -> None:
        """Forget the sequence context; learned segments are kept."""
        self.active_cells: frozenset[int] = frozenset()
        self.winner_cells: frozenset[int] = frozenset()
        self.predictions = self.compute_predictions(frozenset())

    def compute_predictions(self, active_cells: frozenset[int] | set[int]) -> Predictions:
        theta = self.cfg.theta
        active_counts: dict[int, int] = {}
        potential_counts: dict[int, int] = {}
        segments: dict[int, Segment] = {}
        for cell in sorted(active_cells):
            for seg in self.net.segments_fed_by(cell):
                i = seg.parents.index(cell)
                potential_counts[seg.uid] = potential_counts.get(seg.uid, 0) + 1
                segments[seg.uid] = seg
                if seg.on[i] and seg.perms[i] >= theta:
                    active_counts[seg.uid] = active_counts.get(seg.uid, 0) + 1

        predictive: dict[int, int] = {}
        best: dict[int, Segment] = {}
        active_segments: dict[int, list[Segment]] = {}
        matching: dict[int, tuple[int, Segment]] = {}
        for uid in sorted(segments):
            seg = segments[uid]
            count = active_counts.get(uid, 0)
            if count >= self.cfg.activation_threshold:
                active_segments.setdefault(seg.cell, []).append(seg)
                if count > predictive.get(seg.cell, -1):
                    predictive[seg.cell] = count
                    best[seg.cell] = seg
            potential = potential_counts[uid]
            if potential >= self.cfg.min_threshold:
                column = self.net.column_of(seg.cell)
                current = matching.get(column)
                if current is None or (potential, -seg.cell) > (current[0], -current[1].cell):
                    matching[column] = (potential, seg)
        columns = {self.net.column_of(cell) for cell in predictive}
        return Predictions(
            predictive_cells=predictive,
            best_segment=best,
            active_segments=active_segments,
            matching=matching,
            predicted_columns=Sdr(self.columns, tuple(sorted(columns))),
        )

    def activate(self, r_input: Sdr, prior: Predictions) -> tuple[frozenset[int], frozenset[int]]:
        """Predicted cells of active columns fire alone; unanticipated columns burst."""
        active: set[int] = set()
        bursting: set[int] = set()
        for column in r_input.active:
            hits = [c for c in self.net.cells_of(column) if c in prior.predictive_cells]
            if hits:
                active.update(hits)
            else:
                active.update(self.net.cells_of(column))
                bursting.add(column)
        return frozenset(active), frozenset(bursting)

    def select_learning_cells(
        self, r_input: Sdr, prior: Predictions, bursting: frozenset[int]
    ) -> dict[int, tuple[int, Segment | None]]:
        """One learning cell per active column, with the segment it should reinforce."""
        chosen: dict[int, tuple[int, Segment | None]] = {}
        for column in r_input.active:
            if column not in bursting:
                cell = max(
                    (c for c in self.net.cells_of(column) if c in prior.predictive_cells),
                    key=lambda c: (prior.predictive_cells[c], -c),
                )
                chosen[column] = (cell, prior.best_segment[cell])
            elif column in prior.matching:
                seg = prior.matching[column][1]
                chosen[column] = (seg.cell, seg)
            else:
                cell = min(self.net.cells_of(column), key=lambda c: (len(self.net.segments[c]), c))
                chosen[column] = (cell, None)
        return chosen

    def learn_step(
        self,
        r_input: Sdr,
        learning_cells: dict[int, tuple[int, Segment | None]],
        prev_active: frozenset[int],
        prev_winners: frozenset[int],
        prior: Predictions,
        boost: float = 1.0,
    ) -> None:
        cfg = self.cfg
        prev_active_set = set(prev_active)
        inc = cfg.perm_inc * boost
        for column in sorted(learning_cells):
            cell, seg = learning_cells[column]
            if seg is not None:
                self.net.adapt(seg, prev_active_set, inc, cfg.perm_dec)
                seg.last_used = self.iteration
                potential = sum(1 for p in seg.parents if p in prev_active_set)
                self._grow(seg, prev_winners, cfg.new_synapse_count - potential)
                if not seg.parents:
                    self.net.destroy_segment(seg)
            elif prev_winners:
                seg = self.net.create_segment(cell, self.iteration)
                self._grow(seg, prev_winners, cfg.new_synapse_count)

        active_columns = set(r_input.active)
        for cell, segs in prior.active_segments.items():
            if self.net.column_of(cell) in active_columns:
                continue
            for seg in segs:
                if seg in self.net.segments[seg.cell]:
                    self.net.punish(seg, prev_active_set, cfg.perm_dec)
                    if not seg.parents:
                        self.net.destroy_segment(seg)

    def _grow(self, seg: Segment, winners: frozenset[int], wanted: int) -> None:
        existing = set(seg.parents)
        candidates = sorted(c for c in winners if c not in existing and c != seg.cell)
        n = min(wanted, len(candidates))
        if n <= 0:
            return
        overflow = len(seg) + n - self.cfg.max_synapses
        if overflow > 0:
            weakest = sorted(range(len(seg)), key=lambda i: (seg.perms[i], seg.parents[i]))
            for i in sorted(weakest[:overflow], reverse=True):
                self.net.remove_synapse(seg, i)
            n = min(n, self.cfg.max_synapses - len(seg))
        picks = self.rng.choice(len(candidates), size=n, replace=False)
        for i in sorted(int(p) for p in picks):
            self.net.add_synapse(seg, candidates[i], self.cfg.initial_perm)

    def step(self, r_input: Sdr, learning: bool = True, boost: float = 1.0) -> SmStepOutput:
        """Activate on `r_input`, learn the transition when enabled, predict the next input."""
        if r_input.width != self.columns:
            raise ContractViolation(f"input width {r_input.width} != {self.columns} columns")
        prior = self.predictions
        active, bursting = self.activate(r_input, prior)
        learning_cells = self.select_learning_cells(r_input, prior, bursting)
        if learning:
            self.learn_step(
                r_input, learning_cells, self.active_cells, self.winner_cells, prior, boost
            )
        self.iteration += 1
        self.active_cells = active
        self.winner_cells = frozenset(cell for cell, _ in learning_cells.values())
        self.predictions = self.compute_predictions(active)
        return SmStepOutput(
            predicted_columns=self.predictions.predicted_columns,
            active_cells=active,
            predictive_cells=frozenset(self.predictions.predictive_cells),
            learning_cells=self.winner_cells,
            bursting_columns=bursting,
        )

    def snapshot(self) -> dict[str, Any]:
        return {
            "network": self.net.to_dict(),
            "iteration": self.iteration,
            "rng": self.rng.bit_generator.state,
            "active_cells": sorted(self.active_cells),
            "winner_cells": sorted(self.winner_cells),
        }

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            json.dump(self.snapshot(), f)

    def load(self, path: str | Path) -> None:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
            self.net = TemporalNetwork.from_dict(data["network"], self.cfg)
            self.iteration = int(data["iteration"])
            self.rng.bit_generator.state = data["rng"]
            active = frozenset(int(c) for c in data.get("active_cells", []))
            winners = frozenset(int(c) for c in data.get("winner_cells", []))
        except (
            OSError, json.JSONDecodeError, AttributeError, KeyError, TypeError, ValueError
        ) as e:
            raise SnapshotError(f"sequence memory snapshot {path}: {e}") from e
        if any(not 0 <= c < self.net.cell_count for c in active | winners):
            raise SnapshotError(f"sequence memory snapshot {path}: context cell out of range")
        self.active_cells = active
        self.winner_cells = winners
        self.predictions = self.compute_predictions(active)
