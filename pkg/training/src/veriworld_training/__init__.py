"""Staged RL pipeline for the veriworld hypothesis-verification worlds."""

from veriworld_training.config import StageConfig
from veriworld_training.memory import PredictionMemory
from veriworld_training.nets import PolicyNet, PredictionNet

__all__ = ["StageConfig", "PredictionMemory", "PolicyNet", "PredictionNet"]

__version__ = "0.1.0"
