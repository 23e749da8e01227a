import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xpmarl.pomg import BoxSpec
from xpmarl.policies import GaussianPolicy
from xpmarl.prioritization import (
    SCORE_SPEC,
    argsort_desc,
    assign_priorities,
    is_permutation,
    random_rank,
    rank_positions,
)


def stable_oracle(scores):
    return sorted(range(len(scores)), key=lambda i: (-scores[i], i))


scores_st = st.lists(
    st.one_of(st.floats(-1, 1, allow_nan=False), st.sampled_from([-1.0, 0.0, 0.5, 1.0])),
    min_size=2,
    max_size=16,
)


@given(scores_st)
@settings(max_examples=500, deadline=None)
def test_argsort_desc_matches_stable_oracle(scores):
    rank = argsort_desc(scores)
    assert is_permutation(rank, len(scores))
    assert rank.tolist() == stable_oracle(scores)
    ordered = np.asarray(scores)[rank]
    assert np.all(ordered[:-1] >= ordered[1:])


@given(scores_st)
@settings(max_examples=200, deadline=None)
def test_rank_positions_is_inverse(scores):
    rank = argsort_desc(scores)
    pos = rank_positions(rank)
    assert np.array_equal(rank[pos], np.arange(len(scores)))


def test_examples():
    assert argsort_desc([0.3, 0.9, 0.1]).tolist() == [1, 0, 2]
    assert argsort_desc([0.5, 0.5, 0.2]).tolist() == [0, 1, 2]
    assert argsort_desc([0.1, 0.1, 0.1, 0.1]).tolist() == [0, 1, 2, 3]


def test_nan_scores_rejected():
    with pytest.raises(ValueError):
        argsort_desc([0.1, np.nan])


def test_random_rank_is_uniform_permutation():
    rng = np.random.default_rng(0)
    counts = {}
    for _ in range(6000):
        r = tuple(random_rank(3, rng))
        counts[r] = counts.get(r, 0) + 1
    assert len(counts) == 6
    # each of 6 orders expected 1000 times; 5 sigma is about 150
    assert all(abs(c - 1000) < 150 for c in counts.values())
    with pytest.raises(ValueError):
        random_rank(1, rng)


def test_assign_priorities_shapes_and_bounds(caplog):
    rng = np.random.default_rng(0)
    pol = GaussianPolicy(4, SCORE_SPEC, (8,), rng)
    obs = rng.normal(size=(5, 4))
    with caplog.at_level(logging.DEBUG, logger="xpmarl.prioritization"):
        rank, scores, logp, raw = assign_priorities(obs, pol, rng)
    assert is_permutation(rank, 5)
    assert scores.shape == (5,) and logp.shape == (5,) and raw.shape == (5, 1)
    assert np.all(np.abs(scores) <= 1.0)
    assert rank.tolist() == stable_oracle(scores.tolist())
    assert sum("score broadcast" in r.message for r in caplog.records) == 5


def test_assign_priorities_deterministic_uses_mean():
    rng = np.random.default_rng(1)
    pol = GaussianPolicy(3, SCORE_SPEC, (8,), rng)
    obs = rng.normal(size=(4, 3))
    r1 = assign_priorities(obs, pol, None, deterministic=True)
    r2 = assign_priorities(obs, pol, None, deterministic=True)
    np.testing.assert_array_equal(r1[1], r2[1])
    np.testing.assert_array_equal(r1[1], pol.mean_action(obs).reshape(-1))


def test_assign_priorities_requires_two_agents():
    pol = GaussianPolicy(2, BoxSpec(np.array([-1.0]), np.array([1.0])), (4,), np.random.default_rng(0))
    with pytest.raises(ValueError):
        assign_priorities(np.zeros((1, 2)), pol, np.random.default_rng(0))
