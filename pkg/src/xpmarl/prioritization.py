"""Priority assignment: per-agent scores sorted into an acting order.

Agents are identified by 0-based indices internally; logs and reports use
1-based ids.
"""

from __future__ import annotations

import logging

import numpy as np

from .pomg import BoxSpec

log = logging.getLogger(__name__)

SCORE_SPEC = BoxSpec(np.array([-1.0]), np.array([1.0]))


def argsort_desc(scores) -> np.ndarray:
    """Indices ordering ``scores`` from highest to lowest; ties keep ascending index."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    if np.isnan(s).any():
        raise ValueError(f"priority scores contain NaN: {s}")
    # stable sort on the negated key keeps equal scores in index order
    return np.argsort(-s, kind="stable")


def is_permutation(rank, n: int) -> bool:
    r = np.asarray(rank)
    return r.shape == (n,) and np.array_equal(np.sort(r), np.arange(n))


def rank_positions(rank) -> np.ndarray:
    """Inverse permutation: ``pos[agent]`` is the agent's place in ``rank``."""
    rank = np.asarray(rank)
    pos = np.empty(len(rank), dtype=np.int64)
    pos[rank] = np.arange(len(rank))
    return pos


def assign_priorities(obs_p: np.ndarray, policy_p, rng: np.random.Generator | None,
                      deterministic: bool = False):
    """Sample one score per agent from its own observation and rank them.

    ``policy_p`` is a policy head or a :class:`~xpmarl.mappo.MAPPOInstance`
    with a 1-dimensional box action. Returns ``(rank, scores, log_probs, raw)``.
    """
    obs_p = np.asarray(obs_p, dtype=np.float64)
    n = obs_p.shape[0]
    if n <= 1:
        raise ValueError("priority assignment needs more than one agent")
    actor = getattr(policy_p, "actor", policy_p)
    noise = None if deterministic else actor.draw_noise(rng, n)
    scores, raw, logp = actor.sample(obs_p, noise, deterministic)
    scores = scores.reshape(n)
    if log.isEnabledFor(logging.DEBUG):
        for i, sc in enumerate(scores):
            log.debug("score broadcast: agent %d -> %r", i + 1, float(sc))
    return argsort_desc(scores), scores, logp, raw


def random_rank(n: int, rng: np.random.Generator) -> np.ndarray:
    if n <= 1:
        raise ValueError("a rank needs more than one agent")
    return rng.permutation(n)
