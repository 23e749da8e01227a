"""Train-then-evaluate cells and cross-seed summaries."""

from __future__ import annotations

import numpy as np

from ..envs import NavGame
from .config import ExperimentConfig
from .evaluation import MetricsReport, eval_seeds, evaluate_pipeline, greedy_team_value
from .pipeline import make_env
from .trainer import train


def run_cell(cfg: ExperimentConfig, seed: int, eval_episodes: int | None = None,
             out_dir=None, trajectory_path=None) -> tuple:
    """Train one (variant, seed) and evaluate greedily; returns ``(TrainResult, result)``.

    ``result`` is the greedy team value for the matrix game and a
    :class:`MetricsReport` otherwise.
    """
    res = train(cfg, seed, out_dir)
    env = make_env(cfg, training=False)
    if isinstance(env, NavGame):
        return res, greedy_team_value(res.pipeline, env)
    rep = evaluate_pipeline(res.pipeline, env, eval_seeds(eval_episodes or cfg.eval_episodes),
                            cfg.eval_horizon, trajectory_path)
    rep.meta["train_seed"] = seed
    return res, rep


def per_seed_collision(reports: list[MetricsReport]) -> np.ndarray:
    """Mean collision rate over each trained seed's evaluation episodes."""
    return np.array([float(np.mean(r.collision_rate)) for r in reports])
