"""Spatial pooler: overlap scoring, k-winners-take-all and Hebbian permanence learning."""

from __future__ import annotations

import logging
import zipfile
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import SpConfig
from .errors import ContractViolation, SnapshotError
from .sdr import Sdr

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 1


@dataclass
class PermanenceMatrix:
    """Column x input-bit permanences; entries outside a column's potential pool stay 0."""

    perm: np.ndarray  # float64, (columns, input_width)
    potential_pool: np.ndarray  # bool, (columns, input_width)
    connect_threshold: float

    @property
    def columns(self) -> int:
        return self.perm.shape[0]

    @property
    def input_width(self) -> int:
        return self.perm.shape[1]

    def connected(self) -> np.ndarray:
        return self.potential_pool & (self.perm >= self.connect_threshold)

    def copy(self) -> PermanenceMatrix:
        return PermanenceMatrix(
            self.perm.copy(), self.potential_pool.copy(), self.connect_threshold
        )


def init_matrix(cfg: SpConfig, input_width: int, seed: int | None = None) -> PermanenceMatrix:
    """Random potential pools and uniform [0, 1] permanences, reproducible from the seed."""
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    pool_size = int(np.floor(cfg.pool_fraction * input_width + 0.5))
    pool = np.zeros((cfg.columns, input_width), dtype=bool)
    for j in range(cfg.columns):
        pool[j, rng.choice(input_width, size=pool_size, replace=False)] = True
    perm = np.where(pool, rng.uniform(0.0, 1.0, size=pool.shape), 0.0)
    return PermanenceMatrix(perm, pool, cfg.connect_threshold)


def overlap_scores(m: PermanenceMatrix, e: Sdr, mode: str = "connected") -> np.ndarray:
    """Per-column overlap with the input.

    "connected" counts pooled synapses at or above the connect threshold onto active bits;
    "weighted" sums the raw pooled permanences onto active bits.
    """
    if e.width != m.input_width:
        raise ContractViolation(f"input width {e.width} != pooler input width {m.input_width}")
    active = list(e.active)
    if not active:
        return np.zeros(m.columns, dtype=np.int64 if mode == "connected" else np.float64)
    if mode == "connected":
        connected = m.potential_pool[:, active] & (m.perm[:, active] >= m.connect_threshold)
        return connected.sum(axis=1)
    if mode == "weighted":
        return m.perm[:, active].sum(axis=1)
    raise ContractViolation(f"unknown overlap mode {mode!r}")


def kwta_select(scores: np.ndarray, k: int) -> Sdr:
    """The k highest scores win; ties at the cutoff go to the lowest column index."""
    scores = np.asarray(scores)
    if not 1 <= k <= scores.size:
        raise ContractViolation(f"k={k} outside [1, {scores.size}]")
    winners = np.argsort(-scores, kind="stable")[:k]
    return Sdr(int(scores.size), tuple(sorted(int(i) for i in winners)))


def learn(m: PermanenceMatrix, e: Sdr, s: Sdr, alpha: float) -> PermanenceMatrix:
    """Apply perm += alpha * (2*S_j - 1) * E_i on pooled pairs, clamped to [0, 1].

    Mutates and returns `m`.
    """
    active = list(e.active)
    if not active:
        return m
    sign = np.full(m.columns, -1.0)
    sign[list(s.active)] = 1.0
    block = m.perm[:, active] + alpha * sign[:, None] * m.potential_pool[:, active]
    m.perm[:, active] = np.clip(block, 0.0, 1.0)
    return m


class SpatialPooler:
    """One pooler per stream; `pool` is the operation the pipeline calls every step."""

    def __init__(self, cfg: SpConfig, input_width: int):
        self.cfg = cfg
        self.matrix = init_matrix(cfg, input_width)

    @property
    def columns(self) -> int:
        return self.cfg.columns

    def overlap_scores(self, e: Sdr) -> np.ndarray:
        return overlap_scores(self.matrix, e, self.cfg.overlap_mode)

    def pool(self, e: Sdr, learning: bool = True) -> Sdr:
        s = kwta_select(self.overlap_scores(e), self.cfg.k)
        if learning:
            learn(self.matrix, e, s, self.cfg.alpha)
        return s

    def save(self, path: str | Path) -> None:
        np.savez_compressed(
            path,
            version=np.array(SNAPSHOT_VERSION),
            perm=self.matrix.perm,
            potential_pool=self.matrix.potential_pool,
            connect_threshold=np.array(self.matrix.connect_threshold),
        )

    def load(self, path: str | Path) -> None:
        try:
            with np.load(path) as data:
                version = int(data["version"])
                perm = data["perm"]
                pool = data["potential_pool"]
                threshold = float(data["connect_threshold"])
        except (OSError, KeyError, ValueError, zipfile.BadZipFile) as e:
            raise SnapshotError(f"spatial pooler snapshot {path}: {e}") from e
        if version != SNAPSHOT_VERSION:
            raise SnapshotError(f"spatial pooler snapshot version {version} not supported")
        if perm.shape != self.matrix.perm.shape:
            raise SnapshotError(f"spatial pooler snapshot shape {perm.shape} does not fit")
        self.matrix = PermanenceMatrix(perm, pool, threshold)
        logger.debug("Loaded spatial pooler snapshot from %s", path)
