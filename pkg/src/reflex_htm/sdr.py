"""Sparse distributed representations and the primitive operations on them."""

from __future__ import annotations

from collections.abc import Iterable
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation

Fingerprint = tuple[int, tuple[int, ...]]


@dataclass(frozen=True, slots=True)
class Sdr:
    """Fixed-width binary vector stored as its sorted active-bit indices.

    Build instances with `Sdr.of` (or `from_dense` / `parse`), which canonicalize and
    validate; the raw constructor trusts its arguments.
    """

    width: int
    active: tuple[int, ...]

    @classmethod
    def of(cls, width: int, indices: Iterable[int] = ()) -> Sdr:
        active = tuple(sorted({int(i) for i in indices}))
        if width <= 0:
            raise ContractViolation(f"SDR width must be positive, got {width}")
        if active and (active[0] < 0 or active[-1] >= width):
            raise ContractViolation(f"active index out of range for width {width}: {active}")
        return cls(width, active)

    @classmethod
    def empty(cls, width: int) -> Sdr:
        return cls.of(width)

    @classmethod
    def from_dense(cls, bits: np.ndarray) -> Sdr:
        bits = np.asarray(bits).ravel()
        return cls(int(bits.size), tuple(int(i) for i in np.flatnonzero(bits)))

    @classmethod
    def parse(cls, text: str) -> Sdr:
        """Parse the `width:i1,i2,...` text form."""
        width_text, _, indices_text = text.strip().partition(":")
        try:
            width = int(width_text)
            indices = [int(tok) for tok in indices_text.split(",") if tok.strip()]
        except ValueError as e:
            raise ContractViolation(f"malformed SDR text {text!r}") from e
        return cls.of(width, indices)

    def dense(self) -> np.ndarray:
        bits = np.zeros(self.width, dtype=bool)
        if self.active:
            bits[list(self.active)] = True
        return bits

    def __len__(self) -> int:
        return len(self.active)

    def __str__(self) -> str:
        return f"{self.width}:{','.join(map(str, self.active))}"

    @property
    def sparsity(self) -> float:
        return len(self.active) / self.width


def _check_widths(a: Sdr, b: Sdr) -> None:
    if a.width != b.width:
        raise ContractViolation(f"SDR width mismatch: {a.width} != {b.width}")


def overlap_count(a: Sdr, b: Sdr) -> int:
    """Number of active bits shared by `a` and `b`."""
    _check_widths(a, b)
    return len(set(a.active).intersection(b.active))


def hamming_similarity(a: Sdr, b: Sdr) -> float:
    """Fraction of bit positions on which `a` and `b` agree, zeros included."""
    _check_widths(a, b)
    differing = len(set(a.active).symmetric_difference(b.active))
    return 1.0 - differing / a.width


def fingerprint(a: Sdr) -> Fingerprint:
    """Canonical hashable key of an SDR; ordered, so it also serves as a tie-break key."""
    return (a.width, a.active)
