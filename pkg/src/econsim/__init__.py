"""Deterministic multi-agent economic simulation engine.

Composable economic roles (households, governments, banks, firms) stepped as
a Markov game with exact accounting identities, seeded splittable randomness,
and population-vectorized transitions.
"""

from .core import EconomyConfig, EpisodeClock, RngStream, derive_stream, validate_config
from .market import Economy, EconomySnapshot, JointAction, StepResult, global_stats
from .scenario import (
    EpisodeRunner,
    ScenarioSpec,
    load_preset,
    list_presets,
    parse_scenario,
    run_episode,
    run_sweep,
)

__version__ = "0.1.0"

__all__ = [
    "EconomyConfig",
    "EpisodeClock",
    "RngStream",
    "derive_stream",
    "validate_config",
    "Economy",
    "EconomySnapshot",
    "JointAction",
    "StepResult",
    "global_stats",
    "EpisodeRunner",
    "ScenarioSpec",
    "parse_scenario",
    "load_preset",
    "list_presets",
    "run_episode",
    "run_sweep",
    "__version__",
]
