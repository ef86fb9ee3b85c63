"""Experiment registry, configuration, comparison reports and the CLI."""

from .config import ExperimentConfig, load_config
from .experiments import EXPERIMENTS, default_config, run_experiment

__all__ = [
    "ExperimentConfig",
    "load_config",
    "EXPERIMENTS",
    "default_config",
    "run_experiment",
]
