"""Experiment workflow nodes."""

from .dataset_loader import load_stream
from .mode_runner import run_modes
from .report_builder import build_reports
from .report_writer import save_reports
from .window_sweep import run_window_sweep

__all__ = [
    "load_stream",
    "run_modes",
    "run_window_sweep",
    "build_reports",
    "save_reports",
]
