import math

import pytest

from reflex_htm.config import ScalarEncoderConfig
from reflex_htm.encoder import ScalarEncoder, calibrate, encode
from reflex_htm.errors import ContractViolation, EncoderInputError, EncoderRangeError
from reflex_htm.sdr import overlap_count


@pytest.fixture
def cfg() -> ScalarEncoderConfig:
    return ScalarEncoderConfig(width=16, active_width=4, min_value=0.0, max_value=10.0)


def test_range_ends(cfg: ScalarEncoderConfig) -> None:
    assert encode(cfg, 0.0).active == (0, 1, 2, 3)
    assert encode(cfg, 10.0).active == (12, 13, 14, 15)


def test_every_value_has_exact_active_width(cfg: ScalarEncoderConfig) -> None:
    for i in range(101):
        sdr = encode(cfg, i / 10)
        assert len(sdr) == 4
        assert sdr.active == tuple(range(sdr.active[0], sdr.active[0] + 4))


def test_close_values_share_bits(cfg: ScalarEncoderConfig) -> None:
    assert overlap_count(encode(cfg, 5.0), encode(cfg, 5.5)) >= 3
    assert overlap_count(encode(cfg, 0.0), encode(cfg, 10.0)) == 0


def test_clipping(cfg: ScalarEncoderConfig) -> None:
    assert encode(cfg, -3.0) == encode(cfg, 0.0)
    assert encode(cfg, 42.0) == encode(cfg, 10.0)
    strict = cfg.model_copy(update={"clip_out_of_range": False})
    with pytest.raises(EncoderRangeError):
        encode(strict, 10.5)


def test_non_finite_input(cfg: ScalarEncoderConfig) -> None:
    for bad in (math.nan, math.inf, -math.inf):
        with pytest.raises(EncoderInputError):
            encode(cfg, bad)


def test_uncalibrated_config_is_rejected() -> None:
    cfg = ScalarEncoderConfig(width=16, active_width=4)
    with pytest.raises(ContractViolation):
        encode(cfg, 1.0)
    with pytest.raises(ContractViolation):
        ScalarEncoder(cfg)


def test_calibrate_from_stream() -> None:
    cfg = calibrate(ScalarEncoderConfig(width=64, active_width=8), [3.0, math.nan, -1.0, 7.5])
    assert (cfg.min_value, cfg.max_value) == (-1.0, 7.5)
    flat = calibrate(ScalarEncoderConfig(width=64, active_width=8), [2.0, 2.0])
    assert flat.min_value < 2.0 < flat.max_value
    with pytest.raises(ContractViolation):
        calibrate(ScalarEncoderConfig(width=64, active_width=8), [])


def test_bound_encoder_matches_function(cfg: ScalarEncoderConfig) -> None:
    encoder = ScalarEncoder(cfg)
    for x in (0.0, 2.5, 7.1, 10.0):
        assert encoder.encode(x) == encode(cfg, x)
