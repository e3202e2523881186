"""Deterministic 2D swarm simulator for binary site selection.

A swarm of kinematic disk robots samples the floor quality of two zones
and collectively decides which one is better, using one of three
strategies: local belief broadcasts (honeybee), a versioned shared tuple
space (stigmergy), or fixed sampler/networker roles (dol).  The engine
is fully deterministic given a seed and records the movement- and
communication-congestion metrics of each run.
"""

from .arena import ConfigError, WorldConfig, build_world
from .config import SimConfig
from .engine import RunResult, run

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "RunResult",
    "SimConfig",
    "WorldConfig",
    "build_world",
    "run",
    "__version__",
]
