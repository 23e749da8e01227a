"""Bi-stage training loop.

Both learner instances see the same team reward. Each step the priority stage
(if any) ranks the agents, then the decision stage acts. Updates run every
``rollout`` steps, priority first.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .checkpoint import save_checkpoint
from .config import ExperimentConfig
from .pipeline import Pipeline, episode_seed, make_env, seed_streams, wire_variant

log = logging.getLogger(__name__)


def smooth(series, window: int = 5) -> np.ndarray:
    """Trailing moving average; the first ``window - 1`` points use what is available."""
    x = np.asarray(series, dtype=np.float64)
    out = np.empty_like(x)
    c = np.concatenate([[0.0], np.cumsum(x)])
    for t in range(len(x)):
        lo = max(0, t + 1 - window)
        out[t] = (c[t + 1] - c[lo]) / (t + 1 - lo)
    return out


@dataclass
class TrainResult:
    config: ExperimentConfig
    seed: int
    pipeline: Pipeline
    episode_rewards: list = field(default_factory=list)
    episode_steps: list = field(default_factory=list)
    env_steps: int = 0
    updates: list = field(default_factory=list)

    @property
    def smoothed(self) -> np.ndarray:
        return smooth(self.episode_rewards)

    def write_curve(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        sm = self.smoothed
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["episode", "env_steps", "mean_reward", "smoothed_reward"])
            for e, (steps, r) in enumerate(zip(self.episode_steps, self.episode_rewards)):
                w.writerow([e, steps, repr(float(r)), repr(float(sm[e]))])
        return path


class BiStageTrainer:
    def __init__(self, cfg: ExperimentConfig, seed: int) -> None:
        self.cfg = cfg
        self.seed = int(seed)
        self.streams = seed_streams(self.seed)
        self.env = make_env(cfg, training=True)
        self.pipeline = wire_variant(cfg, self.env, self.streams)
        # bootstrap decisions are greedy but M4 ranks and M5 channel noise stay random
        boot = np.random.SeedSequence([self.seed, 0xB007]).spawn(2)
        self._boot_streams = {"rank": np.random.default_rng(boot[0]), "noise": np.random.default_rng(boot[1])}

    def _bootstrap(self, obs) -> tuple[float, float]:
        """Critic values of the state reached after a cut-off step."""
        p = self.pipeline
        d = p.decide(obs, self.env.observable_sets(self.cfg.k_obs), self._boot_streams, deterministic=True)
        vd = p.decision.value(d.decision.modified_obs)
        vp = p.priority.value(obs) if p.priority is not None else 0.0
        return vd, vp

    def _update(self, result: TrainResult) -> None:
        p = self.pipeline
        rng = self.streams["update"]
        info = {}
        if p.priority is not None:
            info["priority"] = p.priority.update(rng)
        info["decision"] = p.decision.update(rng)
        result.updates.append(info)

    def run(self, max_env_steps: int | None = None) -> TrainResult:
        cfg, env, p = self.cfg, self.env, self.pipeline
        result = TrainResult(cfg, self.seed, p)
        rollout = cfg.ppo.rollout
        steps = 0
        for ep in range(cfg.train_episodes):
            obs = env.reset(episode_seed(self.seed, ep))
            total, length = 0.0, 0
            while True:
                d = p.decide(obs, env.observable_sets(cfg.k_obs), self.streams)
                res = env.step(d.actions)
                truncated = bool(res.info.get("truncated", False))
                terminal = res.done and not truncated
                full = len(p.decision.buffer) + 1 >= rollout
                nvd = nvp = 0.0
                if truncated or (full and not res.done):
                    nvd, nvp = self._bootstrap(res.obs)
                p.decision.buffer.add(d.decision.modified_obs, d.decision.raw, d.decision.log_probs,
                                      res.reward, p.decision.value(d.decision.modified_obs),
                                      terminal, res.done or full, nvd)
                if p.priority is not None:
                    p.priority.buffer.add(obs, d.priority_raw, d.priority_log_probs, res.reward,
                                          p.priority.value(obs), terminal, res.done or full, nvp)
                total += res.reward
                length += 1
                steps += 1
                obs = res.obs
                if full:
                    self._update(result)
                if res.done or (max_env_steps is not None and steps >= max_env_steps):
                    break
            result.episode_rewards.append(total / length)
            result.episode_steps.append(steps)
            if max_env_steps is not None and steps >= max_env_steps:
                break
        result.env_steps = steps
        return result


def train(cfg: ExperimentConfig, seed: int, out_dir=None, max_env_steps: int | None = None) -> TrainResult:
    """Train one (variant, seed) cell; optionally persist checkpoint and curve."""
    result = BiStageTrainer(cfg, seed).run(max_env_steps)
    if out_dir is not None:
        out = Path(out_dir)
        stem = f"{cfg.variant}_seed{seed}"
        result.write_curve(out / f"{stem}_curve.csv")
        save_checkpoint(out / f"{stem}.npz", result.pipeline, cfg, seed,
                        {"env_steps": result.env_steps, "episodes": len(result.episode_rewards)})
    return result
