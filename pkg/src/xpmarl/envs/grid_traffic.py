"""Desk-scale lane-following traffic scenario with a merge and a crossing.

Agents are discs that follow a lane centerline at their own speed and may
shift laterally. Actions are ``(acceleration, lateral offset rate)`` in
physical units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..pomg import BoxSpec, StepResult, TeamPOMG
from .scenario import LaneGraph, Scenario, ScenarioError, default_scenario

OWN_FEATURES = 4
NEIGHBOR_FEATURES = 5


@dataclass
class TrafficState:
    lane: np.ndarray  # int, index into the lane graph
    s: np.ndarray  # arc length along the lane (m)
    d: np.ndarray  # lateral offset, left positive (m)
    v: np.ndarray  # speed (m/s)
    t: int = 0

    def copy(self) -> "TrafficState":
        return TrafficState(self.lane.copy(), self.s.copy(), self.d.copy(), self.v.copy(), self.t)


def nearest_neighbors(positions, agent: int, k_obs: int, max_range: float = np.inf) -> list[int]:
    """The ``k_obs`` agents closest to ``agent`` (0-based ids), ties by lower id."""
    row = kernels.nearest_neighbors(positions, k_obs, max_range)[agent]
    return [int(j) for j in row if j >= 0]


class GridTraffic(TeamPOMG):
    def __init__(self, scenario: Scenario | None = None, num_agents: int | None = None,
                 horizon: int | None = None, discount: float = 0.99) -> None:
        sc = scenario or default_scenario()
        if num_agents is not None:
            sc = sc.with_agents(num_agents)
        self.scenario = sc
        self.graph = LaneGraph(sc.lanes)
        self.dyn = sc.dynamics
        self.weights = sc.reward
        self.num_agents = sc.num_agents
        self.k_obs = sc.k_obs
        self.max_episode_steps = int(horizon if horizon is not None else sc.horizon)
        self.discount = discount
        self.sensing_range = np.inf if sc.sensing_range is None else float(sc.sensing_range)
        self.obs_dim = OWN_FEATURES + 2 * len(sc.lookahead) + NEIGHBOR_FEATURES * self.k_obs
        hi = np.array([self.dyn.a_max, self.dyn.lateral_rate_max])
        self.action_spec = BoxSpec(-hi, hi)
        self.state: TrafficState | None = None
        self._pos: np.ndarray | None = None
        self._heading: np.ndarray | None = None
        self.rng: np.random.Generator | None = None
        super().__init__()

    # -- geometry ----------------------------------------------------------

    def _centerline(self, lane, s):
        g = self.graph
        return kernels.lane_positions(g.points, g.cum, g.start, g.count, g.length, g.closed, lane, s)

    def _refresh_geometry(self) -> None:
        st = self.state
        center, heading = self._centerline(st.lane, st.s)
        normal = np.stack([-np.sin(heading), np.cos(heading)], axis=1)
        self._pos = center + st.d[:, None] * normal
        self._heading = heading

    @property
    def positions(self) -> np.ndarray:
        return self._pos

    @property
    def headings(self) -> np.ndarray:
        return self._heading

    def set_state(self, state: TrafficState) -> None:
        self.state = state.copy()
        self._refresh_geometry()

    # -- episode -----------------------------------------------------------

    def reset(self, seed: int) -> np.ndarray:
        self.rng = np.random.default_rng(seed)
        n = self.num_agents
        g = self.graph
        probs = g.length / g.length.sum()
        lanes = np.empty(n, dtype=np.int64)
        ss = np.empty(n)
        placed = np.empty((0, 2))
        for i in range(n):
            for _ in range(1000):
                ln = int(self.rng.choice(len(probs), p=probs))
                s = float(self.rng.uniform(0.0, g.length[ln]))
                xy, _ = self._centerline(np.array([ln]), np.array([s]))
                if placed.shape[0] == 0 or np.min(np.hypot(*(placed - xy).T)) >= self.scenario.min_spawn_gap:
                    break
            else:
                raise ScenarioError(f"could not place {n} agents with gap {self.scenario.min_spawn_gap}")
            lanes[i], ss[i] = ln, s
            placed = np.vstack([placed, xy])
        lo, hi = self.scenario.spawn_speed
        v = self.rng.uniform(lo, hi, size=n) * self.dyn.v_max
        self.state = TrafficState(lanes, ss, np.zeros(n), v, 0)
        self._refresh_geometry()
        return self.observe()

    def step(self, actions) -> StepResult:
        actions = np.asarray(actions, dtype=np.float64)
        self.check_actions(actions)
        st = self.state
        dyn = self.dyn
        v = np.clip(st.v + actions[:, 0] * dyn.dt, 0.0, dyn.v_max)
        d = np.clip(st.d + actions[:, 1] * dyn.dt, -dyn.max_offset, dyn.max_offset)
        lane, s = self.graph.advance_many(st.lane, st.s, v * dyn.dt)
        self.state = TrafficState(lane, s, d, v, st.t + 1)
        self._refresh_geometry()

        collided = kernels.collision_flags(self._pos, dyn.radius)
        off_lane = np.abs(d) > dyn.lane_half_width
        any_collision = bool(collided.any())
        w = self.weights
        reward = (
            w.speed_weight * float(np.mean(v / dyn.v_max))
            - w.collision_penalty * float(any_collision)
            - w.boundary_penalty * float(np.mean(off_lane))
        )
        done = self.state.t >= self.max_episode_steps
        info = {
            "collided": collided,
            "any_collision": any_collision,
            "off_lane": off_lane,
            "speeds": v.copy(),
            "positions": self._pos.copy(),
            "truncated": done,  # the horizon is a time limit, not a terminal state
        }
        return StepResult(self.observe(), reward, done, info)

    # -- observation -------------------------------------------------------

    def _neighbor_table(self, k: int) -> np.ndarray:
        return kernels.nearest_neighbors(self._pos, k, self.sensing_range)

    def observable_sets(self, k_obs: int | None = None) -> list[list[int]]:
        """Per-agent observable agents (0-based ids), nearest first."""
        table = self._neighbor_table(self.k_obs if k_obs is None else k_obs)
        return [[int(j) for j in row if j >= 0] for row in table]

    def observe(self, neighbors: np.ndarray | None = None) -> np.ndarray:
        """Ego-frame features for every agent, shape ``(N, obs_dim)``.

        Layout per agent: speed, lateral offset, distances to the left/right
        lane boundary (all normalized), then (cos, sin) of the lane direction
        at each lookahead distance relative to the current lane heading, then
        ``k_obs`` neighbor blocks of (dx, dy, speed, cos, sin) in the ego
        frame. Blocks are zero when fewer neighbors are in range.
        """
        st, dyn = self.state, self.dyn
        n = self.num_agents
        look = np.asarray(self.scenario.lookahead)
        a_lane, a_s = self.graph.advance_many(
            np.repeat(st.lane, look.size), np.repeat(st.s, look.size), np.tile(look, n)
        )
        _, ah = self._centerline(a_lane, a_s)
        table = self._neighbor_table(self.k_obs) if neighbors is None else neighbors
        return kernels.ego_observation(
            self._pos, self._heading, st.v, st.d, table, ah.reshape(n, look.size),
            dyn.v_max, dyn.lane_half_width,
        )

    def build_observation(self, agent: int) -> np.ndarray:
        return self.observe()[agent]
