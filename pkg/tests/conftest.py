"""Shared fixtures: small engine configurations that run in well under a second."""

import numpy as np
import pytest

from reflex_htm.config import Mode, PipelineConfig, SmConfig


def small_config(mode: Mode = Mode.AHTM, overrides: dict | None = None) -> PipelineConfig:
    """256-column engine whose CAM word (32 subarrays x 8 bits) matches the pooler."""
    data = {
        "mode": mode.value,
        "encoder": {"width": 256, "active_width": 16},
        "sp": {"columns": 256, "k": 10, "alpha": 0.05, "seed": 7},
        "sm": {
            "cells_per_column": 4,
            "activation_threshold": 6,
            "min_threshold": 4,
            "new_synapse_count": 10,
            "max_segments": 16,
            "max_synapses": 24,
            "seed": 7,
        },
        "rm": {"capacity": 256, "count_limit": 255},
        "cam": {"n": 32, "m": 2, "p": 128, "q": 8},
    }
    return PipelineConfig.model_validate(data).with_overrides(overrides or {})


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def toy_sm_config() -> SmConfig:
    return SmConfig(
        cells_per_column=8,
        activation_threshold=3,
        min_threshold=2,
        new_synapse_count=8,
        seed=3,
    )


@pytest.fixture
def small_ahtm() -> PipelineConfig:
    return small_config(Mode.AHTM)
