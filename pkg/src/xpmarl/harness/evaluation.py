"""Greedy evaluation, metrics and trajectory logs."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..envs import NavGame
from ..pomg import exact_matrix_value
from .checkpoint import read_checkpoint, restore_pipeline
from .config import ExperimentConfig
from .pipeline import Pipeline, make_env, seed_streams, wire_variant

EVAL_SEED_BASE = 1_000_000

TRAJECTORY_COLUMNS = (
    "episode_seed", "step", "agent_id", "rank_position", "score", "propagated_from",
    "noise_applied", "action", "received", "x", "y", "speed", "collided",
)


def eval_seeds(n: int) -> list[int]:
    return [EVAL_SEED_BASE + e for e in range(n)]


def summarize(x) -> dict:
    x = np.asarray(x, dtype=np.float64)
    q1, med, q3 = np.percentile(x, [25, 50, 75])
    return {"median": float(med), "q1": float(q1), "q3": float(q3),
            "min": float(x.min()), "max": float(x.max()), "mean": float(x.mean())}


@dataclass
class MetricsReport:
    variant: str
    episode_seeds: list
    collision_rate: np.ndarray  # per episode seed
    relative_average_speed: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def summary(self) -> dict:
        return {"collision_rate": summarize(self.collision_rate),
                "relative_average_speed": summarize(self.relative_average_speed)}

    def write_csv(self, path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["variant", "episode_seed", "collision_rate", "relative_average_speed"])
            for s, c, v in zip(self.episode_seeds, self.collision_rate, self.relative_average_speed):
                w.writerow([self.variant, s, repr(float(c)), repr(float(v))])
        return path

    @classmethod
    def read_csv(cls, path) -> "MetricsReport":
        seeds, cr, sp = [], [], []
        variant = None
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                variant = row["variant"]
                seeds.append(int(row["episode_seed"]))
                cr.append(float(row["collision_rate"]))
                sp.append(float(row["relative_average_speed"]))
        if variant is None:
            raise ValueError(f"{path}: no metric rows")
        return cls(variant, seeds, np.array(cr), np.array(sp))

    @classmethod
    def merge(cls, reports: list["MetricsReport"]) -> "MetricsReport":
        variants = {r.variant for r in reports}
        if len(variants) != 1:
            raise ValueError(f"cannot merge reports of different variants: {sorted(variants)}")
        return cls(
            reports[0].variant,
            [s for r in reports for s in r.episode_seeds],
            np.concatenate([r.collision_rate for r in reports]),
            np.concatenate([r.relative_average_speed for r in reports]),
        )


def _fmt_vec(a) -> str:
    return " ".join(repr(float(v)) for v in np.asarray(a, dtype=np.float64).reshape(-1))


def _trajectory_rows(seed, t, dec, info) -> list:
    n = len(dec.actions)
    pos = None if dec.rank is None else {int(a): p for p, a in enumerate(dec.rank)}
    step = dec.decision
    rows = []
    for i in range(n):
        received = ";".join(f"{j + 1}:{_fmt_vec(v)}" for j, v in step.received[i].items())
        rows.append([
            seed, t, i + 1,
            "" if pos is None else pos[i] + 1,
            "" if dec.scores is None else repr(float(dec.scores[i])),
            ";".join(str(j + 1) for j in step.contributors[i]),
            int(bool(step.noise_applied[i])) if step.noise_applied is not None else 0,
            _fmt_vec(step.actions[i]),
            received,
            repr(float(info["positions"][i, 0])), repr(float(info["positions"][i, 1])),
            repr(float(info["speeds"][i])),
            int(bool(info["collided"][i])),
        ])
    return rows


def evaluate_pipeline(pipeline: Pipeline, env, episode_seeds, horizon: int | None = None,
                      trajectory_path=None) -> MetricsReport:
    """Roll out greedy policies for each seed in the traffic environment."""
    k = pipeline.k_obs
    steps_limit = horizon or env.max_episode_steps
    v_max = env.dyn.v_max
    coll, speed = [], []
    fh = writer = None
    if trajectory_path is not None:
        Path(trajectory_path).parent.mkdir(parents=True, exist_ok=True)
        fh = open(trajectory_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(TRAJECTORY_COLUMNS)
    try:
        for seed in episode_seeds:
            streams = seed_streams(seed)  # rank (random priorities) and channel noise
            obs = env.reset(seed)
            hits, speeds, steps = 0, [], 0
            for t in range(steps_limit):
                dec = pipeline.decide(obs, env.observable_sets(k), streams, deterministic=True)
                res = env.step(dec.actions)
                hits += int(res.info["any_collision"])
                speeds.append(res.info["speeds"])
                steps += 1
                if writer is not None:
                    writer.writerows(_trajectory_rows(seed, t, dec, res.info))
                obs = res.obs
                if res.done:
                    break
            coll.append(hits / steps)
            speed.append(float(np.mean(np.concatenate(speeds))) / v_max)
    finally:
        if fh is not None:
            fh.close()
    return MetricsReport(pipeline.variant, list(episode_seeds), np.array(coll), np.array(speed),
                         {"num_agents": env.num_agents, "horizon": steps_limit})


def greedy_joint_actions(pipeline: Pipeline, env: NavGame) -> np.ndarray:
    obs = env.reset(0)
    streams = seed_streams(EVAL_SEED_BASE)
    return pipeline.decide(obs, env.observable_sets(pipeline.k_obs), streams, deterministic=True).actions


def greedy_team_value(pipeline: Pipeline, env: NavGame) -> float:
    """Exact team reward of the greedy joint policy, via matrix enumeration."""
    a = greedy_joint_actions(pipeline, env)
    p1, p2 = np.eye(3)[int(a[0])], np.eye(3)[int(a[1])]
    return exact_matrix_value(env.payoff, p1, p2)


def load_pipeline(checkpoint, cfg: ExperimentConfig | None = None, scenario_path=None,
                  num_agents: int | None = None, horizon: int | None = None):
    """Rebuild a trained pipeline on a (possibly different) evaluation environment."""
    meta, arrays = read_checkpoint(checkpoint)
    if cfg is None:
        cfg = ExperimentConfig.from_dict(meta["config"])
    env = make_env(cfg, training=False, scenario_path=scenario_path, num_agents=num_agents, horizon=horizon)
    pipe = wire_variant(cfg, env, seed_streams(meta["seed"]))
    restore_pipeline(pipe, meta, arrays)
    return pipe, env, cfg, meta


def run_evaluation(checkpoint, cfg: ExperimentConfig | None = None, scenario_path=None,
                   episodes: int | None = None, num_agents: int | None = None,
                   horizon: int | None = None, trajectory_path=None) -> MetricsReport:
    pipe, env, cfg, meta = load_pipeline(checkpoint, cfg, scenario_path, num_agents, horizon)
    if isinstance(env, NavGame):
        v = greedy_team_value(pipe, env)
        return MetricsReport(cfg.variant, [EVAL_SEED_BASE], np.array([np.nan]), np.array([np.nan]),
                             {"greedy_team_value": v, "train_seed": meta["seed"]})
    report = evaluate_pipeline(pipe, env, eval_seeds(episodes or cfg.eval_episodes),
                               horizon or cfg.eval_horizon, trajectory_path)
    report.meta["train_seed"] = meta["seed"]
    return report
