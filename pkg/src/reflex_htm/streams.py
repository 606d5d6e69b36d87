"""Synthetic value streams for experiments and tests."""

from dataclasses import dataclass
from typing import Any, Literal

import numpy as np
import yaml

from .errors import ContractViolation

StreamKind = Literal["cycle", "noisy-cycle", "random-walk", "injected-anomaly"]
KINDS: tuple[str, ...] = ("cycle", "noisy-cycle", "random-walk", "injected-anomaly")

PATTERN_HIGH = 100.0


@dataclass
class SynthStream:
    values: list[float]
    labels: list[bool] | None = None  # True at injected anomalies

    def __len__(self) -> int:
        return len(self.values)


def cycle_pattern(period: int, rng: np.random.Generator) -> np.ndarray:
    """`period` well-separated levels in a seeded order."""
    if period < 1:
        raise ContractViolation(f"period must be positive, got {period}")
    return rng.permutation(np.linspace(0.0, PATTERN_HIGH, period))


def synth_stream(
    kind: StreamKind,
    length: int,
    seed: int = 0,
    period: int = 5,
    noise: float = 0.05,
    anomalies: int = 10,
    warmup: float = 0.2,
    step_scale: float = 1.0,
) -> SynthStream:
    """Build a deterministic stream of `length` values.

    cycle repeats `period` levels; noisy-cycle replaces each value with a random level with
    probability `noise`; random-walk sums Gaussian steps; injected-anomaly is a cycle with
    `anomalies` out-of-pattern jumps placed after the first `warmup` fraction, and carries labels.
    """
    if length < 1:
        raise ContractViolation(f"length must be positive, got {length}")
    rng = np.random.default_rng(seed)
    if kind == "random-walk":
        values = np.cumsum(rng.normal(0.0, step_scale, size=length))
        return SynthStream(values.tolist())

    pattern = cycle_pattern(period, rng)
    values = pattern[np.arange(length) % period]
    if kind == "cycle":
        return SynthStream(values.tolist())
    if kind == "noisy-cycle":
        hit = rng.random(length) < noise
        values = np.where(hit, rng.uniform(0.0, PATTERN_HIGH, size=length), values)
        return SynthStream(values.tolist())
    if kind == "injected-anomaly":
        start = int(length * warmup)
        if anomalies > length - start:
            raise ContractViolation(f"cannot place {anomalies} anomalies in {length - start} steps")
        positions = rng.choice(np.arange(start, length), size=anomalies, replace=False)
        values = values.copy()
        values[positions] = rng.uniform(1.2 * PATTERN_HIGH, 1.5 * PATTERN_HIGH, size=anomalies)
        labels = np.zeros(length, dtype=bool)
        labels[positions] = True
        return SynthStream(values.tolist(), labels.tolist())
    raise ContractViolation(f"unknown stream kind {kind!r}; expected one of {KINDS}")


def parse_synth_spec(text: str) -> tuple[str, dict[str, Any]]:
    """Split `KIND[:key=val,...]` into the kind and typed keyword arguments."""
    kind, _, rest = text.strip().partition(":")
    if kind not in KINDS:
        raise ContractViolation(f"unknown stream kind {kind!r}; expected one of {KINDS}")
    params: dict[str, Any] = {}
    for item in filter(None, (part.strip() for part in rest.split(","))):
        key, sep, raw = item.partition("=")
        if not sep:
            raise ContractViolation(f"synthetic stream option must be key=value, got {item!r}")
        params[key.strip().replace("-", "_")] = yaml.safe_load(raw)
    return kind, params


def build_synth(text: str, seed: int | None = None) -> SynthStream:
    kind, params = parse_synth_spec(text)
    if seed is not None:
        params.setdefault("seed", seed)
    params.setdefault("length", 2000)
    try:
        return synth_stream(kind, **params)
    except TypeError as e:
        raise ContractViolation(f"bad synthetic stream options {params}: {e}") from e
