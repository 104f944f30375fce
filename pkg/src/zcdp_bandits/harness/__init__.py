"""Experiment configuration, execution, aggregation and persistence."""

from .config import ExperimentConfig, PRESETS, config_from_dict, load_config, preset
from .io import read_summary, read_traces, write_outputs
from .runner import Summary, paired_gap_se, run_experiment, summarize

__all__ = [
    "ExperimentConfig",
    "PRESETS",
    "Summary",
    "config_from_dict",
    "load_config",
    "paired_gap_se",
    "preset",
    "read_summary",
    "read_traces",
    "run_experiment",
    "summarize",
    "write_outputs",
]
