"""Contiguous-bucket scalar encoder."""

import logging
import math
from collections.abc import Sequence

from .config import ScalarEncoderConfig
from .errors import ContractViolation, EncoderInputError, EncoderRangeError
from .sdr import Sdr

logger = logging.getLogger(__name__)


def calibrate(cfg: ScalarEncoderConfig, values: Sequence[float]) -> ScalarEncoderConfig:
    """Fill an uncalibrated config's range from a scan over `values`."""
    if cfg.calibrated:
        return cfg
    finite = [float(v) for v in values if math.isfinite(v)]
    if not finite:
        raise ContractViolation("cannot calibrate the encoder range from an empty stream")
    low, high = min(finite), max(finite)
    if low == high:
        low, high = low - 0.5, high + 0.5
    logger.info("Calibrated encoder range to [%g, %g] over %d values", low, high, len(finite))
    return cfg.model_copy(update={"min_value": low, "max_value": high})


def bucket(cfg: ScalarEncoderConfig, x: float) -> int:
    """Index of the first active bit for `x`."""
    if not cfg.calibrated:
        raise ContractViolation("encoder range is not set; calibrate first")
    if not math.isfinite(x):
        raise EncoderInputError(f"encoder input must be finite, got {x!r}")
    if not cfg.min_value <= x <= cfg.max_value:
        if not cfg.clip_out_of_range:
            raise EncoderRangeError(
                f"{x} outside [{cfg.min_value}, {cfg.max_value}] with clipping disabled"
            )
        x = min(max(x, cfg.min_value), cfg.max_value)
    span = cfg.max_value - cfg.min_value
    return math.floor((x - cfg.min_value) / span * (cfg.width - cfg.active_width) + 0.5)


def encode(cfg: ScalarEncoderConfig, x: float) -> Sdr:
    """Encode `x` as `active_width` consecutive active bits."""
    start = bucket(cfg, x)
    return Sdr(cfg.width, tuple(range(start, start + cfg.active_width)))


class ScalarEncoder:
    """Encoder bound to one calibrated configuration; memoizes per bucket."""

    def __init__(self, cfg: ScalarEncoderConfig):
        if not cfg.calibrated:
            raise ContractViolation("ScalarEncoder needs a calibrated range")
        self.cfg = cfg
        self._cache: dict[int, Sdr] = {}

    @property
    def width(self) -> int:
        return self.cfg.width

    def encode(self, x: float) -> Sdr:
        start = bucket(self.cfg, x)
        sdr = self._cache.get(start)
        if sdr is None:
            sdr = Sdr(self.cfg.width, tuple(range(start, start + self.cfg.active_width)))
            self._cache[start] = sdr
        return sdr
