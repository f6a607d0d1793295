"""leapcatch: reduced-order quadruped simulator and RL stack for
run-and-leap ball catching."""

from .config import FullConfig, default_config, load_config, save_config
from .env import EpisodeSampler, QuadrupedCatchEnv
from .nets import ActorCritic
from .trainer import train
from .evaluate import evaluate, sweep, replay, wilson_interval

__all__ = [
    "FullConfig", "default_config", "load_config", "save_config",
    "EpisodeSampler", "QuadrupedCatchEnv", "ActorCritic",
    "train", "evaluate", "sweep", "replay", "wilson_interval",
]

__version__ = "0.1.0"
