"""Experiment configuration (YAML, versioned schema)."""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import yaml

from ..mappo import PPOConfig
from ..propagation import NoiseSpec

SCHEMA_VERSION = 1

VARIANTS = ("M1_xp", "M2_vanilla", "M3_opponent_model", "M4_random_priority", "M5_noisy_comm")
ENVIRONMENTS = ("nav_game", "grid_traffic")


class ConfigError(ValueError):
    pass


def canonical_variant(name: str) -> str:
    for v in VARIANTS:
        if name == v or name.upper() == v.split("_")[0]:
            return v
    raise ConfigError(f"unknown variant {name!r}; expected one of {', '.join(VARIANTS)}")


@dataclass
class ExperimentConfig:
    variant: str = "M1_xp"
    env: str = "grid_traffic"
    scenario: str | None = None
    seeds: list[int] = field(default_factory=lambda: [0])
    train_episodes: int = 200
    train_horizon: int = 200
    train_agents: int = 4
    eval_episodes: int = 32
    eval_horizon: int = 1200
    eval_agents: int = 15
    eval_scenario: str | None = None
    k_obs: int = 2
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    ppo: PPOConfig = field(default_factory=PPOConfig)
    priority_ppo: PPOConfig | None = None
    schema_version: int = SCHEMA_VERSION

    def __post_init__(self) -> None:
        self.variant = canonical_variant(self.variant)
        if self.env not in ENVIRONMENTS:
            raise ConfigError(f"unknown env {self.env!r}")
        if self.train_episodes < 1 or self.eval_episodes < 1:
            raise ConfigError("episode counts must be positive")
        if self.env == "nav_game" and self.k_obs != 1:
            self.k_obs = 1

    @property
    def priority_cfg(self) -> PPOConfig:
        return self.priority_ppo or self.ppo

    def with_variant(self, variant: str, **changes) -> "ExperimentConfig":
        return replace(self, variant=canonical_variant(variant), **changes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["ppo"] = self.ppo.to_dict()
        d["priority_ppo"] = None if self.priority_ppo is None else self.priority_ppo.to_dict()
        d["noise"] = {"variance_fraction": self.noise.variance_fraction}
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        raw = dict(raw)
        version = raw.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported config schema_version {version}")
        unknown = set(raw) - set(cls.__dataclass_fields__)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        try:
            if "ppo" in raw:
                raw["ppo"] = PPOConfig.from_dict(raw["ppo"] or {})
            if raw.get("priority_ppo") is not None:
                raw["priority_ppo"] = PPOConfig.from_dict(raw["priority_ppo"])
            if "noise" in raw:
                raw["noise"] = NoiseSpec(**(raw["noise"] or {}))
            if "seeds" in raw:
                raw["seeds"] = [int(s) for s in raw["seeds"]]
            return cls(**raw)
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(str(exc)) from exc


def load_config(path: str | Path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            raw = yaml.safe_load(fh)
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a mapping at top level")
    cfg = ExperimentConfig.from_dict(raw)
    base = Path(path).parent
    for key in ("scenario", "eval_scenario"):
        val = getattr(cfg, key)
        if val is not None and not Path(val).is_absolute():
            setattr(cfg, key, str((base / val).resolve()))
    return cfg


def save_config(cfg: ExperimentConfig, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(cfg.to_dict(), fh, sort_keys=False)
