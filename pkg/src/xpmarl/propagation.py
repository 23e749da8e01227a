"""Sequential decision-making with action propagation.

Agents act in rank order. Each agent's observation is extended by ``k_obs``
fixed slots holding ``[action encoding..., presence flag]`` of its observable
higher-priority agents, ordered by descending priority of the sender. Unused
slots are zero.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pomg import DiscreteSpec
from .prioritization import rank_positions


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian channel noise with variance ``variance_fraction * |action_max|``."""

    variance_fraction: float = 0.1

    def __post_init__(self) -> None:
        if self.variance_fraction < 0:
            raise ValueError("variance_fraction must be >= 0")


def modified_dim(obs_dim: int, k_obs: int, spec) -> int:
    return obs_dim + k_obs * (spec.slot_dim + 1)


def observable_higher_priority(rank, agent: int, obs_set) -> list[int]:
    """Agents ahead of ``agent`` in ``rank`` that ``agent`` can observe, in rank order."""
    rank = [int(r) for r in rank]
    if agent not in rank:
        raise ValueError(f"agent {agent} does not appear in rank {rank}")
    k = rank.index(agent)
    visible = set(int(j) for j in obs_set)
    return [j for j in rank[:k] if j in visible]


def build_modified_observation(base_obs, propagated: dict, k_obs: int, slot_dim: int,
                               rank=None) -> np.ndarray:
    """Append ``k_obs`` slots to ``base_obs``.

    ``propagated`` maps sender id to its encoded action. Senders are placed by
    their position in ``rank`` (default: ascending id).
    """
    if len(propagated) > k_obs:
        raise ValueError(f"{len(propagated)} propagated actions exceed k_obs={k_obs}")
    base = np.asarray(base_obs, dtype=np.float64).reshape(-1)
    slots = np.zeros((k_obs, slot_dim + 1))
    senders = list(propagated)
    if rank is not None:
        pos = {int(a): p for p, a in enumerate(rank)}
        senders.sort(key=lambda j: pos[int(j)])
    else:
        senders.sort()
    for q, j in enumerate(senders):
        vec = np.asarray(propagated[j], dtype=np.float64).reshape(-1)
        if vec.size != slot_dim:
            raise ValueError(f"action of agent {j} has width {vec.size}, expected {slot_dim}")
        slots[q, :slot_dim] = vec
        slots[q, slot_dim] = 1.0
    return np.concatenate([base, slots.ravel()])


def inject_noise(action, spec: NoiseSpec | None, max_abs, rng: np.random.Generator | None = None,
                 z: np.ndarray | None = None) -> np.ndarray:
    """Noisy copy of a communicated action; the executed action is never touched.

    ``z`` supplies pre-drawn standard normals; otherwise they come from ``rng``.
    """
    a = np.array(action, dtype=np.float64)
    if spec is None or spec.variance_fraction == 0.0:
        return a
    if z is None:
        z = rng.standard_normal(a.shape)
    std = np.sqrt(spec.variance_fraction * np.abs(np.asarray(max_abs, dtype=np.float64)))
    return a + std * z


def _actor(policy):
    return getattr(policy, "actor", policy)


def predict_opponent_actions(agent: int, obs_of_others: dict, own_policy) -> dict:
    """Policy-mean actions the agent's own (shared) policy assigns to each other agent."""
    actor = _actor(own_policy)
    ids = sorted(obs_of_others)
    if not ids:
        return {}
    batch = np.stack([np.asarray(obs_of_others[j], dtype=np.float64) for j in ids])
    actions = actor.mean_action(batch)
    return {j: actions[q] for q, j in enumerate(ids)}


@dataclass
class DecisionStep:
    actions: np.ndarray  # executed, indexed by agent id
    raw: np.ndarray
    log_probs: np.ndarray
    modified_obs: np.ndarray  # (N, obs_dim + k_obs * (slot_dim + 1))
    contributors: list = field(default_factory=list)  # per agent, sender ids in slot order
    received: list = field(default_factory=list)  # per agent, {sender: slot vector}
    noise_applied: np.ndarray | None = None


def _empty_actions(n: int, spec):
    if isinstance(spec, DiscreteSpec):
        return np.zeros(n, dtype=np.int64)
    return np.zeros((n, spec.dim))


def sequential_decide(rank, obs_d, policy_d, obs_sets, k_obs: int, action_spec,
                      rng: np.random.Generator | None = None, noise: NoiseSpec | None = None,
                      noise_rng: np.random.Generator | None = None,
                      deterministic: bool = False) -> DecisionStep:
    """Decide in rank order, propagating executed actions to lower-priority agents.

    ``policy_d`` is one shared policy (or MAPPO instance) or a per-agent list.
    Base sampling noise is drawn once per step in rank order, so agents whose
    senders have all acted can be evaluated together without changing results.
    """
    obs_d = np.asarray(obs_d, dtype=np.float64)
    n = obs_d.shape[0]
    rank = np.asarray(rank, dtype=np.int64)
    pos = rank_positions(rank)
    per_agent = isinstance(policy_d, (list, tuple))
    actors = [_actor(p) for p in policy_d] if per_agent else None
    shared = None if per_agent else _actor(policy_d)
    lead = actors[int(rank[0])] if per_agent else shared

    z_policy = None
    if not deterministic:
        z_policy = lead.draw_noise(rng, n)[pos]  # row k drawn for the k-th ranked agent
    slot_dim = action_spec.slot_dim
    noisy = noise is not None and noise.variance_fraction > 0.0
    z_noise = noise_rng.standard_normal((n, k_obs, slot_dim))[pos] if noisy else None

    contributors = [observable_higher_priority(rank, i, obs_sets[i]) for i in range(n)]
    level = np.zeros(n, dtype=np.int64)
    for i in rank:
        if contributors[i]:
            level[i] = 1 + max(level[j] for j in contributors[i])

    actions = _empty_actions(n, action_spec)
    raw = np.zeros_like(actions)
    logp = np.zeros(n)
    mod = np.zeros((n, modified_dim(obs_d.shape[1], k_obs, action_spec)))
    received: list = [dict() for _ in range(n)]
    applied = np.zeros(n, dtype=bool)
    encoded = {}

    for lv in range(int(level.max()) + 1 if n else 0):
        group = [int(i) for i in rank if level[i] == lv]
        for i in group:
            for q, j in enumerate(contributors[i]):
                vec = encoded[j]
                if noisy:
                    vec = inject_noise(vec, noise, action_spec.max_abs, z=z_noise[i, q])
                    applied[i] = True
                received[i][j] = vec
            mod[i] = build_modified_observation(obs_d[i], received[i], k_obs, slot_dim, rank)
        if per_agent:
            batches = [([i], actors[i]) for i in group]
        else:
            batches = [(group, shared)]
        for idx, actor in batches:
            zz = None if deterministic else z_policy[idx]
            a, r, lp = actor.sample(mod[idx], zz, deterministic)
            actions[idx] = a
            raw[idx] = r
            logp[idx] = lp
            for q, i in enumerate(idx):
                encoded[i] = action_spec.encode(a[q])
    return DecisionStep(actions, raw, logp, mod, contributors, received, applied)


def simultaneous_decide(obs_d, policy_d, k_obs: int, action_spec, rng=None,
                        deterministic: bool = False, obs_sets=None,
                        predict: bool = False) -> DecisionStep:
    """All agents act at once. Slots stay empty unless ``predict`` fills them
    with opponent predictions for each agent's observable set."""
    obs_d = np.asarray(obs_d, dtype=np.float64)
    n = obs_d.shape[0]
    actor = _actor(policy_d)
    slot_dim = action_spec.slot_dim
    zero_slot = np.stack([build_modified_observation(o, {}, k_obs, slot_dim) for o in obs_d])
    received: list = [dict() for _ in range(n)]
    contributors: list = [[] for _ in range(n)]
    if predict:
        mod = np.empty_like(zero_slot)
        for i in range(n):
            others = sorted(int(j) for j in obs_sets[i])
            guesses = predict_opponent_actions(i, {j: zero_slot[j] for j in others}, actor)
            contributors[i] = others
            received[i] = {j: action_spec.encode(g) for j, g in guesses.items()}
            mod[i] = build_modified_observation(obs_d[i], received[i], k_obs, slot_dim)
    else:
        mod = zero_slot
    z = None if deterministic else actor.draw_noise(rng, n)
    a, r, lp = actor.sample(mod, z, deterministic)
    return DecisionStep(a, r, lp, mod, contributors, received, np.zeros(n, dtype=bool))
