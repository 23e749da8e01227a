from .config import VARIANTS, ConfigError, ExperimentConfig, load_config, save_config
from .pipeline import Pipeline, make_env, seed_streams, wire_variant
from .trainer import BiStageTrainer, TrainResult, smooth, train

__all__ = [
    "VARIANTS",
    "BiStageTrainer",
    "ConfigError",
    "ExperimentConfig",
    "Pipeline",
    "TrainResult",
    "load_config",
    "make_env",
    "save_config",
    "seed_streams",
    "smooth",
    "train",
    "wire_variant",
]
