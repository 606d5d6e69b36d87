"""Oracle-equivalence and invariant suites run by `reflex-htm selftest`."""

from __future__ import annotations

import logging
from collections.abc import Callable, Hashable, Iterable
from dataclasses import dataclass
from itertools import combinations, product
from pathlib import Path

import numpy as np
from pydantic import ValidationError

from .anomaly import ars
from .cam import CamGeometry, CamUnit, Stage
from .cam_reflex import CamReflexMemory
from .errors import ReflexHtmError
from .reflex_memory import ReflexBackend, SoftwareTable
from .sdr import Sdr, fingerprint

logger = logging.getLogger(__name__)


class SelftestFailure(AssertionError):
    pass


@dataclass(frozen=True)
class SuiteResult:
    name: str
    passed: bool
    detail: str = ""


def _check(condition: bool, message: str) -> None:
    if not condition:
        raise SelftestFailure(message)


def random_sdr(rng: np.random.Generator, width: int, active: int) -> Sdr:
    return Sdr(width, tuple(sorted(int(i) for i in rng.choice(width, size=active, replace=False))))


def record_victims(rm: ReflexBackend) -> list[Hashable]:
    """Collect every key `rm` evicts from now on, including evictions made inside `observe`."""
    victims: list[Hashable] = []
    evict = rm.evict_one

    def recording() -> Hashable:
        victim = evict()
        victims.append(victim)
        return victim

    rm.evict_one = recording  # type: ignore[method-assign]
    return victims


def holds(table: SoftwareTable, present: Sdr, next_state: Sdr) -> bool:
    entry = table.table.get(fingerprint(present))
    return entry is not None and fingerprint(next_state) in entry.successors


def suite_ars_oracle(rng: np.random.Generator, trials: int = 10_000) -> str:
    for _ in range(trials):
        a, b = random_sdr(rng, 1024, 20), random_sdr(rng, 1024, 20)
        expected = 1.0 - np.count_nonzero(a.dense() & b.dense()) / np.count_nonzero(b.dense())
        _check(ars(a, b) == expected, f"ars({a}, {b}) != {expected}")
        _check(ars(a, a) == 0.0, f"ars of {a} with itself is not 0")
        disjoint = Sdr.of(1024, sorted(set(range(1024)) - set(b.active))[:20])
        _check(ars(disjoint, b) == 1.0, f"ars of disjoint {disjoint} and {b} is not 1")
    return f"{trials} random pairs"


def _linear_pick(counters: np.ndarray, rows: Iterable[int], mode: str) -> int:
    ordered = sorted(set(rows))
    values = counters[ordered]
    return ordered[int(np.argmax(values) if mode == "max" else np.argmin(values))]


def suite_cam_minmax(rng: np.random.Generator, trials: int = 10_000) -> str:
    """Exhaustive on an 8-row, 3-bit array; randomized on a 128-row, 8-bit one."""
    cam = CamUnit(CamGeometry(n=1, m=1, p=8, q=3))
    counters = rng.integers(0, 8, size=8)
    for row, value in enumerate(counters):
        cam.write(Stage.CONFIDENCE, row, int(value))
    checked = 0
    # every candidate set of up to three rows with every counter assignment
    for size in range(1, 4):
        for rows in combinations(range(8), size):
            for values in product(range(8), repeat=size):
                for row, value in zip(rows, values):
                    cam.write(Stage.CONFIDENCE, row, value)
                    counters[row] = value
                for mode in ("max", "min"):
                    _check(
                        cam.min_max(list(rows), mode) == _linear_pick(counters, rows, mode),
                        f"{mode} of rows {rows} holding {values}",
                    )
                checked += 1
    for values in product(range(8), repeat=4):
        for row, value in enumerate(values):
            cam.write(Stage.CONFIDENCE, row, value)
        rows = list(range(4))
        _check(cam.min_max(rows, "max") == int(np.argmax(values)), f"max of {values}")
        _check(cam.min_max(rows, "min") == int(np.argmin(values)), f"min of {values}")
        checked += 1

    geometry = CamGeometry(n=1, m=1, p=128, q=8)
    cam = CamUnit(geometry)
    for trial in range(trials):
        if trial % 50 == 0:
            counters = rng.integers(0, geometry.confidence_max + 1, size=geometry.rows)
            for row, value in enumerate(counters):
                cam.write(Stage.CONFIDENCE, row, int(value))
        size = int(rng.integers(1, geometry.rows + 1))
        rows = [int(r) for r in rng.choice(geometry.rows, size=size, replace=False)]
        for mode in ("max", "min"):
            _check(
                cam.min_max(rows, mode) == _linear_pick(counters, rows, mode),
                f"trial {trial}: {mode} over {size} rows",
            )
    return f"{checked} exhaustive layouts, {trials} random trials"


def suite_cam_search(rng: np.random.Generator, trials: int = 200) -> str:
    geometry = CamGeometry(n=4, m=1, p=16, q=2)
    cam = CamUnit(geometry)
    words = rng.integers(0, 2, size=(geometry.rows, geometry.word_width)).astype(bool)
    words[3] = words[9]
    for row, word in enumerate(words):
        cam.write(Stage.PRESENT, row, word)
    for _ in range(trials):
        query = words[rng.integers(geometry.rows)] if rng.random() < 0.8 else (
            rng.integers(0, 2, size=geometry.word_width).astype(bool)
        )
        result = cam.search(Stage.PRESENT, query)
        expected = (words == query).all(axis=1)
        _check(np.array_equal(result.matches, expected), "search differs from equality scan")
        _check(result.miss == (not expected.any()), "miss flag wrong")
    return f"{trials} queries"


def suite_rm_oracle(rng: np.random.Generator, steps: int = 100_000) -> str:
    """Unbounded table against a brute-force argmax over replayed counts.

    A bounded table fed the same transitions must never grow past its capacity.
    """
    table = SoftwareTable(capacity=10**6)
    bounded = SoftwareTable(capacity=64)
    states = [random_sdr(rng, 64, 4) for _ in range(12)]
    counts: dict[tuple, dict[tuple, list[int]]] = {}
    for stamp in range(steps):
        a, b = states[rng.integers(len(states))], states[rng.integers(len(states))]
        table.observe(a, b)
        bounded.observe(a, b)
        _check(len(bounded) <= bounded.capacity, f"step {stamp}: {len(bounded)} items stored")
        succ = counts.setdefault(fingerprint(a), {}).setdefault(fingerprint(b), [0, 0])
        succ[0] += 1
        succ[1] = stamp
        query = states[rng.integers(len(states))]
        shadow = counts.get(fingerprint(query))
        got = table.lookup_predict(query, touch=False)
        if shadow is None:
            _check(got is None, "prediction for an unseen state")
            continue
        best = max(shadow.items(), key=lambda kv: (kv[1][0], kv[1][1]))[0]
        _check(got is not None and fingerprint(got) == best, f"step {stamp}: argmax mismatch")
    return f"{steps} steps, {bounded.stats.evictions} bounded evictions"


def suite_rm_equivalence(rng: np.random.Generator, steps: int = 10_000) -> str:
    """Software and CAM reflex memories at full capacity: same predictions, same victims."""
    geometry = CamGeometry(n=16, m=16, p=128, q=8)
    capacity = 2048
    software = SoftwareTable(capacity, granularity="pair", count_limit=geometry.confidence_max)
    hardware = CamReflexMemory(geometry, capacity=capacity)
    software_victims, hardware_victims = record_victims(software), record_victims(hardware)
    states = [random_sdr(rng, geometry.word_width, 6) for _ in range(120)]
    observed: list[tuple[Sdr, Sdr]] = []
    for step in range(steps):
        a, b = states[rng.integers(len(states))], states[rng.integers(len(states))]
        op = rng.random()
        if op < 0.5 or not observed:
            software.observe(a, b)
            hardware.observe(a, b)
            observed.append((a, b))
        elif op < 0.6:
            a, b = observed[rng.integers(len(observed))]
            if holds(software, a, b):
                software.decrement(a, b)
                hardware.decrement(a, b)
        else:
            got_sw, got_hw = software.lookup_predict(a), hardware.lookup_predict(a)
            _check(got_sw == got_hw, f"step {step}: predictions differ")
        _check(
            len(software_victims) == len(hardware_victims)
            and software_victims[-1:] == hardware_victims[-1:],
            f"step {step}: eviction victims differ",
        )
    _check(software_victims == hardware_victims, "eviction victim sequences differ")
    _check(software.stats.as_dict() == hardware.stats.as_dict(), "statistics differ")
    _check(len(software_victims) > 0, "stream too small to exercise eviction")
    return f"{steps} steps, {len(software_victims)} identical evictions"


def suite_snapshot(path: Path) -> str:
    from .pipeline import Pipeline

    pipe = Pipeline.load_snapshot(path)
    return f"snapshot at step {pipe.t}"


SUITES: dict[str, Callable[[np.random.Generator], str]] = {
    "ars_oracle": suite_ars_oracle,
    "cam_minmax": suite_cam_minmax,
    "cam_search": suite_cam_search,
    "rm_oracle": suite_rm_oracle,
    "rm_equivalence": suite_rm_equivalence,
}


def run_selftest(
    seed: int = 0,
    snapshot: str | Path | None = None,
    suites: Iterable[str] | None = None,
) -> list[SuiteResult]:
    """Run the named suites (all by default) with a fresh seeded generator each.

    Failures are collected, not raised.
    """
    names = list(SUITES) if suites is None else list(suites)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise ValueError(f"unknown selftest suites: {', '.join(unknown)}")
    checks: list[tuple[str, Callable[[], str]]] = [
        (name, lambda fn=SUITES[name]: fn(np.random.default_rng(seed))) for name in names
    ]
    if snapshot is not None:
        checks.append(("snapshot", lambda: suite_snapshot(Path(snapshot))))
    results = []
    for name, check in checks:
        try:
            detail = check()
            results.append(SuiteResult(name, True, detail))
        except (SelftestFailure, ReflexHtmError, ValidationError) as e:
            logger.error("Selftest suite %s failed: %s", name, e)
            results.append(SuiteResult(name, False, str(e)))
    return results
