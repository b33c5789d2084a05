"""Lifetime-reliability simulation of manycore chips under two-level Q-learning task mapping."""

from .config import SimConfig, bundled_config, load_config
from .harness import compare, emit_heatmap, run_episode, train

__all__ = ["SimConfig", "bundled_config", "load_config", "compare", "emit_heatmap", "run_episode", "train"]
__version__ = "0.1.0"
