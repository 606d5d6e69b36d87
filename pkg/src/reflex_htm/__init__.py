"""reflex-htm - HTM sequence prediction accelerated by a first-order reflex memory."""

from .config import Mode, PipelineConfig
from .pipeline import Pipeline, RunResult, run_stream
from .sdr import Sdr

__version__ = "0.1.0"

__all__ = ["Mode", "PipelineConfig", "Pipeline", "RunResult", "run_stream", "Sdr"]
