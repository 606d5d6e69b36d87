"""Control unit: picks RM or SM from windowed anomaly scores and dispatches training rules."""

from collections import deque
from dataclasses import dataclass
from enum import Enum

from .config import CuConfig
from .errors import ContractViolation


class Module(str, Enum):
    RM = "RM"
    SM = "SM"


class MemoryAction(str, Enum):
    """What a step's outcome asks of the two memories."""

    USE_RM = "use_rm"  # RM is credited with the step
    USE_SM = "use_sm"
    RM_OBSERVE = "rm_observe"
    RM_DECREMENT = "rm_decrement"
    RM_RETRAIN = "rm_retrain"  # observe the transition SM got right
    SM_LEARN = "sm_learn"
    SM_LEARN_BOOSTED = "sm_learn_boosted"


# keyed by (rm_correct, sm_correct); the pipeline also counts each observed transition in RM
TRAINING_RULES: dict[tuple[bool, bool], frozenset[MemoryAction]] = {
    (False, False): frozenset(
        {MemoryAction.RM_DECREMENT, MemoryAction.RM_OBSERVE, MemoryAction.SM_LEARN}
    ),
    (False, True): frozenset(
        {MemoryAction.USE_SM, MemoryAction.RM_DECREMENT, MemoryAction.RM_RETRAIN}
    ),
    (True, False): frozenset({MemoryAction.USE_RM, MemoryAction.SM_LEARN}),
    (True, True): frozenset({MemoryAction.USE_RM, MemoryAction.SM_LEARN_BOOSTED}),
}


def apply_training_rules(rm_correct: bool, sm_correct: bool) -> frozenset[MemoryAction]:
    return TRAINING_RULES[(bool(rm_correct), bool(sm_correct))]


@dataclass(frozen=True)
class CuTrace:
    chosen: Module
    rm_ars: float
    sm_ars: float
    rm_sum: float
    sm_sum: float


class ControlUnit:
    """Ring buffers of the last `window` scores per module.

    Buffers start zero-filled, so RM is preferred until it accumulates more anomaly than SM.
    """

    def __init__(self, cfg: CuConfig):
        self.cfg = cfg
        self.rm_scores: deque[float] = deque([0.0] * cfg.window, maxlen=cfg.window)
        self.sm_scores: deque[float] = deque([0.0] * cfg.window, maxlen=cfg.window)

    @property
    def window(self) -> int:
        return self.cfg.window

    @property
    def rm_sum(self) -> float:
        return sum(self.rm_scores)

    @property
    def sm_sum(self) -> float:
        return sum(self.sm_scores)

    def record_outcome(self, rm_ars: float, sm_ars: float) -> None:
        for name, score in (("rm", rm_ars), ("sm", sm_ars)):
            if not 0.0 <= score <= 1.0:
                raise ContractViolation(f"{name} anomaly score {score} outside [0, 1]")
        self.rm_scores.append(float(rm_ars))
        self.sm_scores.append(float(sm_ars))

    def choose(self) -> Module:
        if self.cfg.pinned is not None:
            return Module(self.cfg.pinned)
        return Module.RM if self.rm_sum <= self.sm_sum else Module.SM

    def boost_for(self, actions: frozenset[MemoryAction]) -> float:
        """Multiplier on the SM permanence increment; reinforced updates need an unpinned CU."""
        if MemoryAction.SM_LEARN_BOOSTED in actions and self.cfg.pinned is None:
            return self.cfg.boost_factor
        return 1.0

    def trace(self) -> CuTrace:
        return CuTrace(
            self.choose(),
            self.rm_scores[-1],
            self.sm_scores[-1],
            self.rm_sum,
            self.sm_sum,
        )
