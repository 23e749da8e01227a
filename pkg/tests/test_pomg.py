import itertools

import numpy as np
import pytest

from xpmarl.envs import DEFAULT_PAYOFF, NavGame
from xpmarl.pomg import (
    BoundsViolation,
    BoxSpec,
    DiscreteSpec,
    TeamPOMG,
    ZeroRewardWrapper,
    exact_matrix_value,
    joint_log_prob,
    monte_carlo_value,
)


def test_box_spec_contains_and_encode():
    spec = BoxSpec(np.array([-1.0, -2.0]), np.array([1.0, 2.0]))
    assert spec.dim == 2 and spec.slot_dim == 2
    assert spec.contains([0.5, -2.0])
    assert not spec.contains([1.5, 0.0])
    assert not spec.contains([np.nan, 0.0])
    np.testing.assert_array_equal(spec.encode([0.25, 1.0]), [0.25, 1.0])
    np.testing.assert_array_equal(spec.max_abs, [1.0, 2.0])


def test_discrete_spec_one_hot():
    spec = DiscreteSpec(3)
    np.testing.assert_array_equal(spec.encode(2), [0.0, 0.0, 1.0])
    assert spec.contains(1) and not spec.contains(3) and not spec.contains(1.0)


def test_team_game_rejects_single_agent():
    class Solo(NavGame):
        num_agents = 1

    with pytest.raises(ValueError):
        Solo()


def test_team_game_rejects_bad_discount():
    class Undiscounted(NavGame):
        discount = 1.0

    with pytest.raises(ValueError):
        Undiscounted()


def test_step_rejects_out_of_bounds_actions():
    env = NavGame()
    env.reset(0)
    with pytest.raises(BoundsViolation):
        env.step([0, 3])
    with pytest.raises(BoundsViolation):
        env.step([0])
    with pytest.raises(BoundsViolation):
        env.step([0.5, 1])


def test_shared_reward_identical_across_agents():
    env = NavGame()
    env.reset(0)
    res = env.step([0, 1])
    r = res.agent_rewards(2)
    assert r[0] == r[1] == 10.0


def test_zero_reward_wrapper():
    env = ZeroRewardWrapper(NavGame())
    env.reset(0)
    assert env.step([1, 1]).reward == 0.0


def test_joint_log_prob_is_sum():
    lp = np.array([-0.1, -2.5, -0.3])
    assert joint_log_prob(lp) == pytest.approx(-2.9, abs=1e-12)


def test_exact_matrix_value_uniform():
    # 20/9: the nine cells sum to 20 (worked out by hand from the table)
    u = np.full(3, 1 / 3)
    assert exact_matrix_value(DEFAULT_PAYOFF, u, u) == pytest.approx(20 / 9, abs=1e-12)


def test_exact_matrix_value_matches_enumeration():
    rng = np.random.default_rng(0)
    for _ in range(20):
        p1, p2 = rng.dirichlet(np.ones(3)), rng.dirichlet(np.ones(3))
        brute = sum(p1[a] * p2[b] * DEFAULT_PAYOFF[a][b] for a, b in itertools.product(range(3), repeat=2))
        assert exact_matrix_value(DEFAULT_PAYOFF, p1, p2) == pytest.approx(brute, abs=1e-12)


def test_exact_matrix_value_rejects_unnormalized():
    with pytest.raises(ValueError):
        exact_matrix_value(DEFAULT_PAYOFF, [0.5, 0.5, 0.5], [1, 0, 0])


def test_monte_carlo_agrees_with_exact_value():
    env = NavGame()
    p = np.array([0.2, 0.5, 0.3])

    def joint(obs, rng):
        return [int(rng.choice(3, p=p)), int(rng.choice(3, p=p))]

    est = monte_carlo_value(env, joint, 20000, seed=1)
    exact = exact_matrix_value(DEFAULT_PAYOFF, p, p)
    assert est.shape == (2,)
    # payoff std is below 10, so 20000 draws give a standard error under 0.08
    assert abs(est[0] - exact) < 0.3


def test_abstract_base_requires_methods():
    with pytest.raises(TypeError):
        TeamPOMG()
