"""Team partially observable Markov game contract and shared records."""

from __future__ import annotations

import abc
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np


class BoundsViolation(ValueError):
    """An action outside its agent's action spec was passed to ``step``."""


@dataclass(frozen=True)
class BoxSpec:
    """Continuous per-agent action space."""

    low: np.ndarray
    high: np.ndarray

    @property
    def dim(self) -> int:
        return int(self.low.shape[0])

    @property
    def slot_dim(self) -> int:
        return self.dim

    @property
    def max_abs(self) -> np.ndarray:
        return np.maximum(np.abs(self.low), np.abs(self.high))

    def contains(self, a) -> bool:
        a = np.asarray(a, dtype=np.float64)
        return a.shape == self.low.shape and bool(np.all(a >= self.low) and np.all(a <= self.high))

    def contains_all(self, actions) -> bool:
        a = np.asarray(actions, dtype=np.float64)
        return a.ndim == 2 and a.shape[1] == self.dim and bool(((a >= self.low) & (a <= self.high)).all())

    def encode(self, a) -> np.ndarray:
        return np.asarray(a, dtype=np.float64)


@dataclass(frozen=True)
class DiscreteSpec:
    """Finite per-agent action set ``{0..n-1}``; communicated as one-hot."""

    n: int

    @property
    def slot_dim(self) -> int:
        return self.n

    @property
    def max_abs(self) -> np.ndarray:
        return np.ones(self.n)

    def contains(self, a) -> bool:
        return isinstance(a, (int, np.integer)) and 0 <= int(a) < self.n

    def encode(self, a) -> np.ndarray:
        v = np.zeros(self.n)
        v[int(a)] = 1.0
        return v


ActionSpec = BoxSpec | DiscreteSpec


@dataclass
class StepResult:
    obs: np.ndarray
    reward: float
    done: bool
    info: dict = field(default_factory=dict)

    def agent_rewards(self, num_agents: int) -> np.ndarray:
        """Per-agent view of the shared reward (identical entries)."""
        return np.full(num_agents, self.reward)


class TeamPOMG(abc.ABC):
    """Environment where every agent receives the same scalar reward.

    Observations are returned as a ``(num_agents, obs_dim)`` array indexed by
    agent id (0-based internally). ``step`` is deterministic given the state,
    the joint action and the environment's seeded generator.
    """

    num_agents: int
    obs_dim: int
    action_spec: ActionSpec
    discount: float = 0.99
    max_episode_steps: int = 1

    def __init__(self) -> None:
        if self.num_agents <= 1:
            raise ValueError(f"a team game needs more than one agent, got {self.num_agents}")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must lie in [0, 1), got {self.discount}")

    @abc.abstractmethod
    def reset(self, seed: int) -> np.ndarray: ...

    @abc.abstractmethod
    def step(self, actions: Sequence[Any]) -> StepResult: ...

    @abc.abstractmethod
    def observable_sets(self, k_obs: int) -> list[list[int]]:
        """Per-agent list of observable agent ids, nearest first."""

    def check_actions(self, actions: Sequence[Any]) -> None:
        if len(actions) != self.num_agents:
            raise BoundsViolation(f"expected {self.num_agents} actions, got {len(actions)}")
        if isinstance(self.action_spec, BoxSpec) and self.action_spec.contains_all(actions):
            return
        for i, a in enumerate(actions):
            if not self.action_spec.contains(a):
                raise BoundsViolation(f"agent {i + 1}: action {a!r} outside {self.action_spec}")


@dataclass
class TransitionRecord:
    obs: np.ndarray
    actions: np.ndarray
    log_probs: np.ndarray
    team_reward: float
    next_obs: np.ndarray
    done: bool
    value_estimates: np.ndarray


class ZeroRewardWrapper(TeamPOMG):
    """Delegates to ``env`` but reports a reward of exactly zero."""

    def __init__(self, env: TeamPOMG) -> None:
        self.env = env
        self.num_agents = env.num_agents
        self.obs_dim = env.obs_dim
        self.action_spec = env.action_spec
        self.discount = env.discount
        self.max_episode_steps = env.max_episode_steps
        super().__init__()

    def reset(self, seed):
        return self.env.reset(seed)

    def step(self, actions):
        res = self.env.step(actions)
        return StepResult(res.obs, 0.0, res.done, res.info)

    def observable_sets(self, k_obs):
        return self.env.observable_sets(k_obs)


def joint_log_prob(per_agent_log_probs) -> float:
    """Log-probability of a joint action under independent per-agent sampling."""
    return float(np.sum(per_agent_log_probs))


JointPolicy = Callable[[np.ndarray, np.random.Generator], list]


def monte_carlo_value(
    env: TeamPOMG,
    joint_policy: JointPolicy,
    num_rollouts: int,
    seed: int,
    reset_seeds: Callable[[int], int] | None = None,
) -> np.ndarray:
    """Average discounted team return per agent.

    ``joint_policy(obs, rng)`` returns one action per agent. Initial states are
    drawn by resetting with ``reset_seeds(k)`` (default: ``seed + k``).
    """
    if num_rollouts < 1:
        raise ValueError("num_rollouts must be >= 1")
    rng = np.random.default_rng(seed)
    total = 0.0
    for k in range(num_rollouts):
        obs = env.reset(reset_seeds(k) if reset_seeds else seed + k)
        ret, disc = 0.0, 1.0
        for _ in range(env.max_episode_steps):
            res = env.step(joint_policy(obs, rng))
            ret += disc * res.reward
            disc *= env.discount
            obs = res.obs
            if res.done:
                break
        total += ret
    return np.full(env.num_agents, total / num_rollouts)


def exact_matrix_value(payoff, policy_1, policy_2, atol: float = 1e-9) -> float:
    """Expected payoff of two independent mixed strategies, ``p1 @ payoff @ p2``."""
    payoff = np.asarray(payoff, dtype=np.float64)
    p1 = np.asarray(policy_1, dtype=np.float64)
    p2 = np.asarray(policy_2, dtype=np.float64)
    for name, p, n in (("policy_1", p1, payoff.shape[0]), ("policy_2", p2, payoff.shape[1])):
        if p.shape != (n,) or np.any(p < 0) or abs(p.sum() - 1.0) > atol:
            raise ValueError(f"{name} is not a distribution over {n} actions: {p}")
    return float(p1 @ payoff @ p2)
