import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from xpmarl.pomg import BoxSpec, DiscreteSpec
from xpmarl.policies import CategoricalPolicy, GaussianPolicy
from xpmarl.propagation import (
    NoiseSpec,
    build_modified_observation,
    inject_noise,
    modified_dim,
    observable_higher_priority,
    predict_opponent_actions,
    sequential_decide,
    simultaneous_decide,
)

SPEC = BoxSpec(np.array([-2.0, -0.2]), np.array([2.0, 0.2]))


def test_observable_higher_priority_examples():
    assert observable_higher_priority([2, 0, 1], 1, [0, 2]) == [2, 0]
    assert observable_higher_priority([2, 0, 1], 2, [0, 1]) == []
    assert observable_higher_priority([2, 0, 1], 0, [1]) == []
    with pytest.raises(ValueError):
        observable_higher_priority([0, 1], 5, [0])


@given(st.integers(2, 10), st.integers(0, 2**31 - 1))
@settings(max_examples=200, deadline=None)
def test_observable_higher_priority_is_prefix_intersection(n, seed):
    rng = np.random.default_rng(seed)
    rank = rng.permutation(n).tolist()
    agent = int(rng.integers(n))
    obs_set = [int(j) for j in rng.choice(n, size=int(rng.integers(0, n)), replace=False) if j != agent]
    got = observable_higher_priority(rank, agent, obs_set)
    prefix = rank[: rank.index(agent)]
    assert set(got) == set(prefix) & set(obs_set)
    assert got == [j for j in prefix if j in got]


def test_modified_observation_layout():
    base = np.array([1.0, 2.0])
    mod = build_modified_observation(base, {3: [0.5, -0.1], 1: [1.0, 0.0]}, 3, 2, rank=[3, 1, 0])
    assert mod.shape == (modified_dim(2, 3, SPEC),)
    np.testing.assert_array_equal(mod, [1, 2, 0.5, -0.1, 1, 1.0, 0.0, 1, 0, 0, 0])


def test_modified_observation_errors():
    with pytest.raises(ValueError):
        build_modified_observation([0.0], {0: [1, 1], 1: [1, 1]}, 1, 2)
    with pytest.raises(ValueError):
        build_modified_observation([0.0], {0: [1, 1, 1]}, 1, 2)


def test_inject_noise_zero_variance_is_exact_copy():
    a = np.array([0.3, -0.05])
    out = inject_noise(a, NoiseSpec(0.0), SPEC.max_abs, np.random.default_rng(0))
    assert out is not a
    np.testing.assert_array_equal(out, a)


def test_inject_noise_statistics():
    rng = np.random.default_rng(0)
    spec = NoiseSpec(0.1)
    a = np.array([0.5, 0.0])
    draws = np.stack([inject_noise(a, spec, SPEC.max_abs, rng) for _ in range(40000)])
    # variance = fraction * |a_max| per dimension
    np.testing.assert_allclose(draws.var(axis=0), [0.2, 0.02], rtol=0.04)
    np.testing.assert_allclose(draws.mean(axis=0), a, atol=0.01)


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec(-0.1)


def _setup(n=5, k=2, seed=0):
    rng = np.random.default_rng(seed)
    pol = GaussianPolicy(3 + k * 3, SPEC, (8,), rng)
    obs = rng.normal(size=(n, 3))
    sets = [[j for j in range(n) if j != i][:k] for i in range(n)]
    return rng, pol, obs, sets


def test_sequential_matches_one_by_one_evaluation():
    rng, pol, obs, sets = _setup()
    rank = np.array([3, 0, 4, 1, 2])
    step = sequential_decide(rank, obs, pol, sets, 2, SPEC, rng=np.random.default_rng(7))
    # reference: agents strictly one after another with the same per-rank noise
    z = pol.draw_noise(np.random.default_rng(7), 5)
    done = {}
    for k, i in enumerate(rank):
        senders = [j for j in rank[:k] if j in sets[i]]
        mod = build_modified_observation(obs[i], {j: done[j] for j in senders}, 2, 2, rank)
        a, _, _ = pol.sample(mod[None], z[k : k + 1])
        done[int(i)] = a[0]
    for i in range(5):
        np.testing.assert_allclose(step.actions[i], done[i], rtol=0, atol=1e-12)


def test_policy_swap_does_not_change_higher_priority_actions():
    rng, pol, obs, sets = _setup(seed=3)
    other = GaussianPolicy(pol.obs_dim, SPEC, (8,), np.random.default_rng(99))
    rank = np.array([1, 4, 0, 3, 2])
    a = sequential_decide(rank, obs, [pol] * 5, sets, 2, SPEC, rng=np.random.default_rng(1))
    swapped = [pol] * 5
    swapped[3] = other  # fourth in rank
    b = sequential_decide(rank, obs, swapped, sets, 2, SPEC, rng=np.random.default_rng(1))
    for i in (1, 4, 0):
        np.testing.assert_array_equal(a.actions[i], b.actions[i])
    assert not np.array_equal(a.actions[3], b.actions[3])


def test_noise_only_touches_communicated_copies():
    _, pol, obs, sets = _setup(seed=4)
    rank = np.arange(5)
    clean = sequential_decide(rank, obs, pol, sets, 2, SPEC, rng=np.random.default_rng(2),
                              deterministic=False)
    noisy = sequential_decide(rank, obs, pol, sets, 2, SPEC, rng=np.random.default_rng(2),
                              noise=NoiseSpec(0.1), noise_rng=np.random.default_rng(5))
    # top-ranked agent sees nothing, so its executed action is unchanged
    np.testing.assert_array_equal(clean.actions[0], noisy.actions[0])
    for i in range(1, 5):
        for j, vec in noisy.received[i].items():
            assert not np.array_equal(vec, noisy.actions[j])
    assert noisy.noise_applied[1:].all() and not noisy.noise_applied[0]


def test_zero_noise_is_bit_identical_to_clean():
    _, pol, obs, sets = _setup(seed=5)
    rank = np.array([2, 0, 1, 4, 3])
    a = sequential_decide(rank, obs, pol, sets, 2, SPEC, rng=np.random.default_rng(3))
    b = sequential_decide(rank, obs, pol, sets, 2, SPEC, rng=np.random.default_rng(3),
                          noise=NoiseSpec(0.0), noise_rng=np.random.default_rng(8))
    np.testing.assert_array_equal(a.actions, b.actions)
    np.testing.assert_array_equal(a.modified_obs, b.modified_obs)


def test_simultaneous_has_empty_slots():
    rng, pol, obs, sets = _setup()
    step = simultaneous_decide(obs, pol, 2, SPEC, rng=rng)
    np.testing.assert_array_equal(step.modified_obs[:, 3:], 0.0)


def test_opponent_prediction_uses_own_policy_mean():
    rng, pol, obs, sets = _setup()
    step = simultaneous_decide(obs, pol, 2, SPEC, rng=rng, obs_sets=sets, predict=True)
    zero = np.stack([build_modified_observation(o, {}, 2, 2) for o in obs])
    means = pol.mean_action(zero)
    for i in range(5):
        for q, j in enumerate(sorted(sets[i])):
            np.testing.assert_allclose(step.modified_obs[i, 3 + 3 * q : 5 + 3 * q], means[j])
            assert step.modified_obs[i, 5 + 3 * q] == 1.0


def test_predict_opponent_actions_empty():
    pol = GaussianPolicy(2, SPEC, (4,), np.random.default_rng(0))
    assert predict_opponent_actions(0, {}, pol) == {}


def test_discrete_propagation_one_hot():
    spec = DiscreteSpec(3)
    pol = CategoricalPolicy(4, spec, (8,), np.random.default_rng(0))
    step = sequential_decide([1, 0], np.zeros((2, 0)), pol, [[1], [0]], 1, spec, deterministic=True)
    a1 = int(step.actions[1])
    np.testing.assert_array_equal(step.modified_obs[0], np.append(np.eye(3)[a1], 1.0))
    np.testing.assert_array_equal(step.modified_obs[1], np.zeros(4))
