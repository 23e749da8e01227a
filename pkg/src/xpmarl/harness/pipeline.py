"""Wiring of the five model variants onto the shared learner components."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..envs import GridTraffic, NavGame, default_scenario, load_scenario
from ..mappo import MAPPOInstance
from ..pomg import TeamPOMG
from ..prioritization import SCORE_SPEC, assign_priorities, random_rank
from ..propagation import (
    DecisionStep,
    NoiseSpec,
    modified_dim,
    sequential_decide,
    simultaneous_decide,
)
from .config import ExperimentConfig

STREAMS = ("env", "decision", "priority", "rank", "noise", "update", "init_decision", "init_priority")


def seed_streams(seed: int) -> dict[str, np.random.Generator]:
    """Independent named generators derived from one experiment seed."""
    children = np.random.SeedSequence(seed).spawn(len(STREAMS))
    return {name: np.random.default_rng(ss) for name, ss in zip(STREAMS, children)}


def episode_seed(seed: int, episode: int) -> int:
    return int(np.random.SeedSequence([seed, episode]).generate_state(1)[0])


def make_env(cfg: ExperimentConfig, training: bool = True, scenario_path: str | None = None,
             num_agents: int | None = None, horizon: int | None = None) -> TeamPOMG:
    if cfg.env == "nav_game":
        return NavGame()
    path = scenario_path or (cfg.scenario if training else (cfg.eval_scenario or cfg.scenario))
    sc = load_scenario(path) if path else default_scenario()
    n = num_agents or (cfg.train_agents if training else cfg.eval_agents)
    d = sc.to_dict()
    d["num_agents"] = n
    d["k_obs"] = cfg.k_obs
    sc = type(sc).from_dict(d)
    h = horizon or (cfg.train_horizon if training else cfg.eval_horizon)
    return GridTraffic(sc, horizon=h, discount=cfg.ppo.gamma)


@dataclass
class StepDecision:
    rank: np.ndarray | None
    scores: np.ndarray | None
    priority_raw: np.ndarray | None
    priority_log_probs: np.ndarray | None
    decision: DecisionStep

    @property
    def actions(self):
        return self.decision.actions


class Pipeline:
    """One variant's per-step decision procedure.

    ``M1_xp``: learned ranks + action propagation; ``M2_vanilla``: simultaneous
    actions with empty slots; ``M3_opponent_model``: simultaneous actions with
    slots holding own-policy predictions; ``M4_random_priority``: uniformly
    random ranks + propagation; ``M5_noisy_comm``: M1 with noisy communicated
    actions.
    """

    def __init__(self, variant: str, decision: MAPPOInstance, priority: MAPPOInstance | None,
                 k_obs: int, action_spec, noise: NoiseSpec | None) -> None:
        self.variant = variant
        self.decision = decision
        self.priority = priority
        self.k_obs = k_obs
        self.action_spec = action_spec
        self.noise = noise

    @property
    def uses_rank(self) -> bool:
        return self.variant in ("M1_xp", "M4_random_priority", "M5_noisy_comm")

    @property
    def learns_priority(self) -> bool:
        return self.priority is not None

    def decide(self, obs: np.ndarray, obs_sets, streams: dict, deterministic: bool = False) -> StepDecision:
        n = obs.shape[0]
        rank = scores = p_raw = p_logp = None
        if self.learns_priority:
            rank, scores, p_logp, p_raw = assign_priorities(
                obs, self.priority, None if deterministic else streams["priority"], deterministic
            )
        elif self.variant == "M4_random_priority":
            rank = random_rank(n, streams["rank"])
        if self.uses_rank:
            dec = sequential_decide(
                rank, obs, self.decision, obs_sets, self.k_obs, self.action_spec,
                rng=None if deterministic else streams["decision"],
                noise=self.noise if self.variant == "M5_noisy_comm" else None,
                noise_rng=streams.get("noise"),
                deterministic=deterministic,
            )
        else:
            dec = simultaneous_decide(
                obs, self.decision, self.k_obs, self.action_spec,
                rng=None if deterministic else streams["decision"],
                deterministic=deterministic, obs_sets=obs_sets,
                predict=self.variant == "M3_opponent_model",
            )
        return StepDecision(rank, scores, p_raw, p_logp, dec)


def wire_variant(cfg: ExperimentConfig, env: TeamPOMG, streams: dict) -> Pipeline:
    """Assemble the learner instances a variant needs.

    Only M1 and M5 construct (and train) a priority instance.
    """
    spec = env.action_spec
    d_dim = modified_dim(env.obs_dim, cfg.k_obs, spec)
    decision = MAPPOInstance(d_dim, env.num_agents, spec, cfg.ppo, streams["init_decision"], "decision")
    priority = None
    if cfg.variant in ("M1_xp", "M5_noisy_comm"):
        priority = MAPPOInstance(env.obs_dim, env.num_agents, SCORE_SPEC, cfg.priority_cfg,
                                 streams["init_priority"], "priority")
    noise = cfg.noise if cfg.variant == "M5_noisy_comm" else None
    return Pipeline(cfg.variant, decision, priority, cfg.k_obs, spec, noise)
