"""Scenario definition files for the grid-traffic environment.

A scenario is a YAML document::

    schema_version: 1
    name: desk
    lanes:
      - {id: loop, points: [[0, 0], [4, 0], [4, 3], [0, 3]], closed: true}
      - {id: ramp, points: [[0.4, -1], [2, 0]], successor: loop, successor_s: 2.0}
    num_agents: 4
    k_obs: 2
    horizon: 1200
    dynamics: {dt: 0.05, v_max: 1.0, a_max: 2.0, ...}
    reward: {speed_weight: 1.0, collision_penalty: 2.0, boundary_penalty: 0.5}

Open lanes without a successor wrap back to their first point.
"""

from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .. import kernels

SCHEMA_VERSION = 1


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Dynamics:
    dt: float = 0.05
    v_max: float = 1.0
    a_max: float = 2.0
    lateral_rate_max: float = 0.2
    radius: float = 0.06
    lane_half_width: float = 0.08
    max_offset: float = 0.12


@dataclass(frozen=True)
class RewardWeights:
    speed_weight: float = 1.0
    collision_penalty: float = 2.0
    boundary_penalty: float = 0.5


@dataclass(frozen=True)
class Lane:
    id: str
    points: tuple[tuple[float, float], ...]
    closed: bool = False
    successor: str | None = None
    successor_s: float = 0.0


@dataclass(frozen=True)
class Scenario:
    name: str
    lanes: tuple[Lane, ...]
    num_agents: int = 4
    k_obs: int = 2
    horizon: int = 1200
    min_spawn_gap: float = 0.3
    sensing_range: float | None = None
    spawn_speed: tuple[float, float] = (0.2, 0.6)
    lookahead: tuple[float, ...] = (0.25, 0.5)
    dynamics: Dynamics = field(default_factory=Dynamics)
    reward: RewardWeights = field(default_factory=RewardWeights)
    schema_version: int = SCHEMA_VERSION

    def with_agents(self, n: int) -> "Scenario":
        d = self.to_dict()
        d["num_agents"] = n
        d["k_obs"] = min(self.k_obs, n - 1)  # fewer agents than observation slots
        return Scenario.from_dict(d)

    def translated(self, offset) -> "Scenario":
        dx, dy = (float(v) for v in offset)
        d = self.to_dict()
        for lane in d["lanes"]:
            lane["points"] = [[x + dx, y + dy] for x, y in lane["points"]]
        return Scenario.from_dict(d)

    def to_dict(self) -> dict:
        d = asdict(self)
        for lane in d["lanes"]:
            lane["points"] = [list(p) for p in lane["points"]]
        d["spawn_speed"] = list(self.spawn_speed)
        d["lookahead"] = list(self.lookahead)
        return d

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_dict(cls, raw: dict) -> "Scenario":
        raw = copy.deepcopy(raw)
        version = raw.pop("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ScenarioError(f"unsupported scenario schema_version {version}")
        try:
            lanes = tuple(
                Lane(
                    id=str(ln["id"]),
                    points=tuple((float(x), float(y)) for x, y in ln["points"]),
                    closed=bool(ln.get("closed", False)),
                    successor=ln.get("successor"),
                    successor_s=float(ln.get("successor_s", 0.0)),
                )
                for ln in raw.pop("lanes")
            )
            dyn = Dynamics(**raw.pop("dynamics", {}))
            rew = RewardWeights(**raw.pop("reward", {}))
            for key in ("spawn_speed", "lookahead"):
                if key in raw:
                    raw[key] = tuple(float(v) for v in raw[key])
            sc = cls(lanes=lanes, dynamics=dyn, reward=rew, **raw)
        except (KeyError, TypeError, ValueError) as exc:
            raise ScenarioError(f"malformed scenario: {exc}") from exc
        sc.validate()
        return sc

    def validate(self) -> None:
        ids = [ln.id for ln in self.lanes]
        if len(set(ids)) != len(ids):
            raise ScenarioError("duplicate lane ids")
        for ln in self.lanes:
            if len(ln.points) < 2:
                raise ScenarioError(f"lane {ln.id} needs at least two points")
            if ln.successor is not None and ln.successor not in ids:
                raise ScenarioError(f"lane {ln.id}: unknown successor {ln.successor}")
        if self.num_agents < 2:
            raise ScenarioError("num_agents must exceed 1")
        if not 0 <= self.k_obs < self.num_agents:
            raise ScenarioError("k_obs must satisfy 0 <= k_obs < num_agents")


def load_scenario(path: str | Path) -> Scenario:
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: expected a mapping at top level")
    return Scenario.from_dict(raw)


def save_scenario(scenario: Scenario, path: str | Path) -> None:
    with open(path, "w") as fh:
        yaml.safe_dump(scenario.to_dict(), fh, sort_keys=False)


def default_scenario(num_agents: int = 4) -> Scenario:
    """Two-lane loop with an on-ramp and a 4-way crossing."""
    text = resources.files("xpmarl.envs").joinpath("desk_scenario.yaml").read_text()
    return Scenario.from_dict(yaml.safe_load(text)).with_agents(num_agents)


class LaneGraph:
    """Flattened polyline storage used by the position kernel."""

    def __init__(self, lanes: tuple[Lane, ...]) -> None:
        self.ids = [ln.id for ln in lanes]
        pts, cums, starts, counts, lengths = [], [], [], [], []
        offset = 0
        for ln in lanes:
            p = np.array(ln.points, dtype=np.float64)
            if ln.closed:
                p = np.vstack([p, p[:1]])
            seg = np.hypot(*np.diff(p, axis=0).T)
            if np.any(seg <= 0):
                raise ScenarioError(f"lane {ln.id} has a zero-length segment")
            c = np.concatenate([[0.0], np.cumsum(seg)])
            pts.append(p)
            cums.append(c)
            starts.append(offset)
            counts.append(len(p))
            lengths.append(c[-1])
            offset += len(p)
        self.points = np.vstack(pts)
        self.cum = np.concatenate(cums)
        self.start = np.array(starts, dtype=np.int64)
        self.count = np.array(counts, dtype=np.int64)
        self.length = np.array(lengths)
        self.closed = np.array([ln.closed for ln in lanes], dtype=np.bool_)
        self.successor = np.array(
            [-1 if ln.successor is None else self.ids.index(ln.successor) for ln in lanes],
            dtype=np.int64,
        )
        self.successor_s = np.array([ln.successor_s for ln in lanes])

    def advance(self, lane: int, s: float, ds: float) -> tuple[int, float]:
        """Move ``ds`` metres along the lane network from ``(lane, s)``."""
        s = s + ds
        for _ in range(8):
            length = self.length[lane]
            if self.closed[lane]:
                return lane, s % length
            if s < length:
                return lane, s
            overflow = s - length
            if self.successor[lane] < 0:
                s = overflow
                continue
            s = self.successor_s[lane] + overflow
            lane = int(self.successor[lane])
        return lane, s

    def advance_many(self, lane, s, ds) -> tuple[np.ndarray, np.ndarray]:
        ds = np.broadcast_to(np.asarray(ds, dtype=np.float64), np.shape(s))
        return kernels.advance_lanes(
            lane, s, ds, self.length, self.closed, self.successor, self.successor_s
        )
