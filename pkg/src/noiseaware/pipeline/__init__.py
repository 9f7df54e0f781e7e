"""Corpus generation, training, end-to-end runs and the lift experiment."""

from .config import ConfigError, PipelineConfig, load_config, parse_config
from .corpus import Manifest, assign_splits, largest_remainder, noisy_castings, synthesize

__all__ = [
    "ConfigError",
    "Manifest",
    "PipelineConfig",
    "assign_splits",
    "largest_remainder",
    "load_config",
    "noisy_castings",
    "parse_config",
    "synthesize",
]
