"""Experiment presets, configuration, pipeline driver and command line."""

from .config import ExperimentConfig, load_config, parse_assignments
from .presets import PRESETS, Preset, get_preset, preset_profiles
from .runner import (
    SWEEP_AXES,
    ExperimentOutcome,
    SweepTable,
    build_spec,
    cached_kernels,
    cached_response,
    read_summary,
    run_experiment,
    sweep,
)

__all__ = [
    "ExperimentConfig",
    "load_config",
    "parse_assignments",
    "PRESETS",
    "Preset",
    "get_preset",
    "preset_profiles",
    "SWEEP_AXES",
    "ExperimentOutcome",
    "SweepTable",
    "build_spec",
    "cached_kernels",
    "cached_response",
    "read_summary",
    "run_experiment",
    "sweep",
]
