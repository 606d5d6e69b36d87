"""Online step loop: encoder -> spatial pooler -> RM / SM -> control unit -> emission."""

from __future__ import annotations

import json
import logging
import time
from collections.abc import Sequence
from dataclasses import dataclass, field
from pathlib import Path

from .anomaly import MATCH_THRESHOLD, ars, classification_metrics, timing_stats
from .cam import CamGeometry, CostLedger
from .cam_reflex import CamReflexMemory
from .config import Mode, PipelineConfig
from .control_unit import ControlUnit, CuTrace, MemoryAction, Module, apply_training_rules
from .encoder import ScalarEncoder, calibrate
from .errors import ContractViolation, SnapshotError
from .models import ArsRecord, MetricsSummary, TimingStats
from .reflex_memory import ReflexBackend, SoftwareTable
from .sdr import Sdr
from .sequence_memory import SequenceMemory
from .spatial_pooler import SpatialPooler

logger = logging.getLogger(__name__)

SNAPSHOT_VERSION = 2
SM_ONLY = frozenset({MemoryAction.SM_LEARN})


@dataclass(slots=True)
class StepTrace:
    step: int
    value: float
    encoded: Sdr
    pooled: Sdr
    rm_prediction: Sdr | None
    sm_prediction: Sdr | None  # None when SM inference was skipped
    emitted: Sdr
    chosen: Module
    record: ArsRecord | None  # scores of the previous step's predictions against `pooled`
    actions: frozenset[MemoryAction]
    cu: CuTrace | None = None  # control-unit state the choice was made from
    duration_s: float = 0.0
    cam_latency_ns: float = 0.0

    @property
    def rm_served(self) -> bool:
        return self.chosen is Module.RM and self.rm_prediction is not None

    def as_dict(self) -> dict:
        return {
            "step": self.step,
            "value": self.value,
            "pooled": str(self.pooled),
            "rm_prediction": None if self.rm_prediction is None else str(self.rm_prediction),
            "sm_prediction": None if self.sm_prediction is None else str(self.sm_prediction),
            "emitted": str(self.emitted),
            "chosen": self.chosen.value,
            "record": None if self.record is None else self.record.model_dump(),
            "actions": sorted(a.value for a in self.actions),
            "cu": None if self.cu is None else {
                "chosen": self.cu.chosen.value,
                "rm_ars": self.cu.rm_ars,
                "sm_ars": self.cu.sm_ars,
                "rm_sum": self.cu.rm_sum,
                "sm_sum": self.cu.sm_sum,
            },
            "duration_ms": self.duration_s * 1000.0,
            "cam_latency_ns": self.cam_latency_ns,
        }


@dataclass
class RunResult:
    mode: Mode
    traces: list[StepTrace]
    metrics: MetricsSummary
    timing: TimingStats
    rm_stats: dict[str, int] | None = None
    ledger: CostLedger | None = None
    config: PipelineConfig | None = field(default=None, repr=False)

    @property
    def records(self) -> list[ArsRecord]:
        return [t.record for t in self.traces if t.record is not None]

    @property
    def emitted(self) -> list[Sdr]:
        return [t.emitted for t in self.traces]

    @property
    def rm_fraction(self) -> float:
        return sum(t.rm_served for t in self.traces) / len(self.traces)

    @property
    def cam_latency_ns_per_step(self) -> float:
        if self.ledger is None:
            return 0.0
        return self.ledger.latency_ns / (len(self.traces) * self.timing.repeat_count)

    def write_trace(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            for t in self.traces:
                f.write(json.dumps(t.as_dict()) + "\n")


def build_reflex_memory(cfg: PipelineConfig) -> ReflexBackend | None:
    if cfg.mode is Mode.HTM:
        return None
    if cfg.mode is Mode.H_AHTM:
        return CamReflexMemory(CamGeometry.from_config(cfg.cam), capacity=cfg.rm.capacity)
    return SoftwareTable(cfg.rm.capacity, cfg.rm.granularity, cfg.rm.count_limit)


class Pipeline:
    """One stream's full engine state; `step` consumes one value."""

    def __init__(self, cfg: PipelineConfig):
        self.cfg = cfg
        self.encoder = ScalarEncoder(cfg.encoder)
        self.sp = SpatialPooler(cfg.sp, cfg.encoder.width)
        self.sm = SequenceMemory(cfg.sp.columns, cfg.sm)
        self.rm = build_reflex_memory(cfg)
        cu_cfg = cfg.cu
        if cfg.mode is Mode.HTM:
            cu_cfg = cu_cfg.model_copy(update={"pinned": "SM"})
        self.cu = ControlUnit(cu_cfg)
        self.t = 0
        self._prev_pooled: Sdr | None = None
        self._prev_rm: Sdr | None = None
        self._prev_sm: Sdr | None = None
        self._prev_emitted: Sdr | None = None
        self._last_sm_ars = 1.0

    @property
    def ledger(self) -> CostLedger | None:
        return self.rm.ledger if isinstance(self.rm, CamReflexMemory) else None

    def _score(self, pooled: Sdr) -> tuple[ArsRecord, bool, bool]:
        rm_ars = 1.0 if self._prev_rm is None else ars(self._prev_rm, pooled)
        if self._prev_sm is None:
            # skipped SM keeps its last score and is not credited
            sm_ars, sm_correct = self._last_sm_ars, False
        else:
            sm_ars = ars(self._prev_sm, pooled)
            sm_correct = sm_ars <= MATCH_THRESHOLD
            self._last_sm_ars = sm_ars
        emitted_ars = ars(self._prev_emitted, pooled)
        record = ArsRecord(
            step=self.t,
            ars_rm=rm_ars,
            ars_sm=sm_ars,
            ars_emitted=emitted_ars,
            matched=emitted_ars <= MATCH_THRESHOLD,
        )
        rm_correct = self._prev_rm is not None and rm_ars <= MATCH_THRESHOLD
        return record, rm_correct, sm_correct

    def _train_rm(self, actions: frozenset[MemoryAction], pooled: Sdr) -> None:
        """Apply the rule's corrections, then count the observed transition exactly once."""
        prev = self._prev_pooled
        if MemoryAction.RM_DECREMENT in actions and self._prev_rm is not None:
            self.rm.decrement(prev, self._prev_rm)
        if MemoryAction.RM_RETRAIN in actions:
            self.rm.retrain(prev, pooled)
        else:
            self.rm.observe(prev, pooled)

    def step(self, x: float) -> StepTrace:
        start = time.perf_counter()
        cam_before = self.ledger.latency_ns if self.ledger is not None else 0.0
        learning = self.cfg.learning

        encoded = self.encoder.encode(x)
        pooled = self.sp.pool(encoded, learning)

        record = None
        actions = SM_ONLY
        boost = 1.0
        if self._prev_pooled is not None:
            record, rm_correct, sm_correct = self._score(pooled)
            self.cu.record_outcome(record.ars_rm, record.ars_sm)
            if self.rm is not None:
                actions = apply_training_rules(rm_correct, sm_correct)
                if learning:
                    self._train_rm(actions, pooled)
                boost = self.cu.boost_for(actions)

        chosen = self.cu.choose()
        cu_trace = self.cu.trace()
        rm_pred = self.rm.lookup_predict(pooled, touch=learning) if self.rm is not None else None
        skip_sm = (
            chosen is Module.RM and rm_pred is not None and self.cfg.cu.skip_sm_when_rm_confident
        )
        if skip_sm:
            self.sm.reset()
            sm_pred = None
        else:
            sm_pred = self.sm.step(pooled, learning, boost).predicted_columns

        emitted = rm_pred if chosen is Module.RM else sm_pred
        if emitted is None:
            emitted = Sdr.empty(self.sp.columns)

        trace = StepTrace(
            step=self.t,
            value=float(x),
            encoded=encoded,
            pooled=pooled,
            rm_prediction=rm_pred,
            sm_prediction=sm_pred,
            emitted=emitted,
            chosen=chosen,
            record=record,
            actions=actions,
            cu=cu_trace,
        )
        self._prev_pooled, self._prev_rm, self._prev_sm = pooled, rm_pred, sm_pred
        self._prev_emitted = emitted
        self.t += 1
        if self.ledger is not None:
            trace.cam_latency_ns = self.ledger.latency_ns - cam_before
        trace.duration_s = time.perf_counter() - start
        return trace

    def save_snapshot(self, directory: str | Path) -> None:
        """Write everything a restored pipeline needs to continue the run step for step."""
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        self.sp.save(out / "sp.npz")
        self.sm.save(out / "sm.json")
        if self.rm is not None:
            self.rm.dump(out / "rm.jsonl")
        if self.ledger is not None:
            self.ledger.save(out / "ledger.json")
        state = {
            "version": SNAPSHOT_VERSION,
            "config": self.cfg.model_dump(mode="json", by_alias=True),
            "t": self.t,
            "rm_scores": list(self.cu.rm_scores),
            "sm_scores": list(self.cu.sm_scores),
            "last_sm_ars": self._last_sm_ars,
            "prev": {
                "pooled": _sdr_text(self._prev_pooled),
                "rm": _sdr_text(self._prev_rm),
                "sm": _sdr_text(self._prev_sm),
                "emitted": _sdr_text(self._prev_emitted),
            },
        }
        with open(out / "pipeline.json", "w", encoding="utf-8") as f:
            json.dump(state, f, indent=2)

    @classmethod
    def load_snapshot(cls, directory: str | Path) -> Pipeline:
        src = Path(directory)
        try:
            with open(src / "pipeline.json", "r", encoding="utf-8") as f:
                state = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise SnapshotError(f"pipeline snapshot {src}: {e}") from e
        if state.get("version") != SNAPSHOT_VERSION:
            raise SnapshotError(f"pipeline snapshot version {state.get('version')!r} not supported")
        pipe = cls(PipelineConfig.model_validate(state["config"]))
        pipe.sp.load(src / "sp.npz")
        pipe.sm.load(src / "sm.json")
        if pipe.rm is not None:
            pipe.rm.restore(src / "rm.jsonl")
        if isinstance(pipe.rm, CamReflexMemory):
            pipe.rm.cam.ledger = CostLedger.load(src / "ledger.json")
        try:
            pipe.t = int(state["t"])
            pipe.cu.rm_scores.extend(float(s) for s in state["rm_scores"])
            pipe.cu.sm_scores.extend(float(s) for s in state["sm_scores"])
            pipe._last_sm_ars = float(state["last_sm_ars"])
            prev = state["prev"]
            pipe._prev_pooled = _parse_sdr(prev["pooled"])
            pipe._prev_rm = _parse_sdr(prev["rm"])
            pipe._prev_sm = _parse_sdr(prev["sm"])
            pipe._prev_emitted = _parse_sdr(prev["emitted"])
        except (KeyError, TypeError, ValueError, ContractViolation) as e:
            raise SnapshotError(f"pipeline snapshot {src}: {e}") from e
        logger.info("Loaded pipeline snapshot from %s at step %d", src, pipe.t)
        return pipe


def _sdr_text(sdr: Sdr | None) -> str | None:
    return None if sdr is None else str(sdr)


def _parse_sdr(text: str | None) -> Sdr | None:
    return None if text is None else Sdr.parse(text)


def calibrated(cfg: PipelineConfig, values: Sequence[float]) -> PipelineConfig:
    """Config whose encoder range covers `values` when none was configured."""
    if cfg.encoder.calibrated:
        return cfg
    return cfg.model_copy(update={"encoder": calibrate(cfg.encoder, values)})


def run_stream(
    cfg: PipelineConfig,
    values: Sequence[float],
    labels: Sequence[bool] | None = None,
) -> RunResult:
    """Drive a fresh pipeline over `values`, `cfg.repeat_count` times.

    Runs are deterministic, so the traces of the last repeat stand for all of them; timing
    pools every repeat.
    """
    if len(values) == 0:
        raise ContractViolation("cannot run an empty stream")
    if labels is not None and len(labels) != len(values):
        raise ContractViolation(f"{len(labels)} labels for {len(values)} values")
    cfg = calibrated(cfg, values)
    durations: list[float] = []
    ledger = CostLedger()
    for _ in range(cfg.repeat_count):
        pipe = Pipeline(cfg)
        if isinstance(pipe.rm, CamReflexMemory):
            pipe.rm.cam.ledger = ledger
        traces = [pipe.step(x) for x in values]
        durations.extend(t.duration_s for t in traces)

    timing = timing_stats(durations, cfg.repeat_count)
    records = [t.record for t in traces if t.record is not None]
    rm_fraction = sum(t.rm_served for t in traces) / len(traces)
    if records:
        metrics = classification_metrics(
            records,
            None if labels is None else [bool(labels[r.step]) for r in records],
            rm_hit_fraction=rm_fraction,
            mean_step_time_ms=timing.mean_ms,
        )
    else:
        metrics = MetricsSummary(steps=0, labelled=labels is not None, match_rate=0.0)
    logger.info(
        "%s run finished: %d steps, match rate %.3f, RM-served %.3f, %.3f ms/step",
        cfg.mode.label, len(traces), metrics.match_rate, rm_fraction, timing.mean_ms,
    )
    return RunResult(
        mode=cfg.mode,
        traces=traces,
        metrics=metrics,
        timing=timing,
        rm_stats=None if pipe.rm is None else pipe.rm.stats.as_dict(),
        ledger=ledger if cfg.mode is Mode.H_AHTM else None,
        config=cfg,
    )


def prefix_match_rates(result: RunResult, spans: Sequence[tuple[int, int]]) -> list[float]:
    """Match rate of the emitted predictions over each [start, end) step span."""
    rates = []
    for start, end in spans:
        matched = [r.matched for r in result.records if start <= r.step < end]
        rates.append(sum(matched) / len(matched) if matched else 0.0)
    return rates
