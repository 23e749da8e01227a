"""Metric recount from a trajectory log, using only the standard library.

Kept independent of the simulator and of numpy so it can serve as an oracle
for the evaluation metrics.
"""

from __future__ import annotations

import csv
import math
from collections import OrderedDict


def recount(path, v_max: float) -> dict:
    """Per episode seed: ``{"collision_rate": ..., "relative_average_speed": ...}``."""
    steps: OrderedDict = OrderedDict()
    speeds: dict = {}
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            seed = int(row["episode_seed"])
            key = int(row["step"])
            per_seed = steps.setdefault(seed, {})
            per_seed[key] = per_seed.get(key, False) or row["collided"] == "1"
            speeds.setdefault(seed, []).append(float(row["speed"]))
    out = {}
    for seed, flags in steps.items():
        hit = sum(1 for v in flags.values() if v)
        sp = speeds[seed]
        out[seed] = {
            "collision_rate": hit / len(flags),
            "relative_average_speed": math.fsum(sp) / len(sp) / v_max,
        }
    return out
