"""Two-agent head-on navigation game (single simultaneous choice)."""

from __future__ import annotations

import numpy as np

from ..pomg import DiscreteSpec, StepResult, TeamPOMG

LEFT, STRAIGHT, RIGHT = 0, 1, 2
ACTION_NAMES = ("left", "straight", "right")

# Rows: agent 1 action, columns: agent 2 action, each in the agent's own frame.
# Head-on geometry puts agent 1's left in the same corridor as agent 2's right.
DEFAULT_PAYOFF = np.array(
    [
        [5.0, 10.0, -10.0],
        [10.0, -10.0, 10.0],
        [-10.0, 10.0, 5.0],
    ]
)


def mirror(a: int) -> int:
    return 2 - int(a)


def parse_action(a) -> int:
    if isinstance(a, str):
        return ACTION_NAMES.index(a)
    return a


def nav_game_step(actions, payoff=DEFAULT_PAYOFF) -> float:
    a1, a2 = (int(parse_action(a)) for a in actions)
    return float(payoff[a1, a2])


class NavGame(TeamPOMG):
    """One-step team game; the observation is an empty context vector."""

    num_agents = 2
    obs_dim = 0
    action_spec = DiscreteSpec(3)
    discount = 0.0
    max_episode_steps = 1

    def __init__(self, payoff=None) -> None:
        self.payoff = np.array(DEFAULT_PAYOFF if payoff is None else payoff, dtype=np.float64)
        if self.payoff.shape != (3, 3):
            raise ValueError("payoff must be 3x3")
        super().__init__()

    def _obs(self) -> np.ndarray:
        return np.zeros((2, 0))

    def reset(self, seed: int) -> np.ndarray:
        return self._obs()

    def step(self, actions) -> StepResult:
        actions = [parse_action(a) for a in actions]
        self.check_actions(actions)
        return StepResult(self._obs(), nav_game_step(actions, self.payoff), True, {})

    def observable_sets(self, k_obs: int) -> list[list[int]]:
        return [[1], [0]] if k_obs >= 1 else [[], []]

    def team_optimum(self) -> float:
        return float(self.payoff.max())
