"""Learned priority ranking and within-step action propagation for cooperative MARL."""

from .kernels import BACKEND
from .mappo import DivergenceError, MAPPOInstance, PPOConfig
from .pomg import BoxSpec, DiscreteSpec, StepResult, TeamPOMG
from .prioritization import argsort_desc, assign_priorities, random_rank
from .propagation import NoiseSpec, sequential_decide, simultaneous_decide

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "BoxSpec",
    "DiscreteSpec",
    "DivergenceError",
    "MAPPOInstance",
    "NoiseSpec",
    "PPOConfig",
    "StepResult",
    "TeamPOMG",
    "argsort_desc",
    "assign_priorities",
    "random_rank",
    "sequential_decide",
    "simultaneous_decide",
]
