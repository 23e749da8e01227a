"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The numba path is used when numba imports cleanly and the environment
variable ``XPMARL_DISABLE_NUMBA`` is unset or ``0``. Both paths are always
importable as ``numpy_kernels`` / ``numba_kernels`` so they can be compared
directly (see ``benchmarks/bench_kernels.py``).
"""

from __future__ import annotations

import os
import types

import numpy as np

__all__ = [
    "BACKEND",
    "gae",
    "pairwise_distances",
    "collision_flags",
    "nearest_neighbors",
    "lane_positions",
    "advance_lanes",
    "ego_observation",
    "numpy_kernels",
    "numba_kernels",
]


# --------------------------------------------------------------------------
# numpy path
# --------------------------------------------------------------------------

def _gae_np(rewards, values, next_values, dones, ends, gamma, lam):
    T = rewards.shape[0]
    adv = np.zeros(values.shape, dtype=np.float64)
    running = np.zeros(values.shape[1], dtype=np.float64)
    for t in range(T - 1, -1, -1):
        if ends[t]:
            running[:] = 0.0
            boot = 0.0 if dones[t] else 1.0
            nxt = next_values[t]
        else:
            boot = 1.0
            nxt = values[t + 1]
        delta = rewards[t] + gamma * boot * nxt - values[t]
        running = delta + gamma * lam * running
        adv[t] = running
    return adv


def _pairwise_np(pos):
    diff = pos[:, None, :] - pos[None, :, :]
    return np.sqrt((diff * diff).sum(axis=-1))


def _collisions_np(pos, radius):
    d = _pairwise_np(pos)
    np.fill_diagonal(d, np.inf)
    return (d < 2.0 * radius).any(axis=1)


def _knn_np(pos, k, max_range):
    n = pos.shape[0]
    d = _pairwise_np(pos)
    out = np.full((n, k), -1, dtype=np.int64)
    for i in range(n):
        others = np.concatenate((np.arange(i), np.arange(i + 1, n)))
        dist = d[i, others]
        order = np.argsort(dist, kind="stable")[:k]
        keep = order[dist[order] <= max_range]
        out[i, : keep.size] = others[keep]
    return out


def _lanes_np(points, cum, start, count, length, closed, lane_idx, s):
    n = lane_idx.shape[0]
    xy = np.empty((n, 2), dtype=np.float64)
    heading = np.empty(n, dtype=np.float64)
    for a in range(n):
        ln = lane_idx[a]
        lo = start[ln]
        pts = points[lo : lo + count[ln]]
        c = cum[lo : lo + count[ln]]
        sa = s[a]
        if closed[ln]:
            sa = sa % length[ln]
        else:
            sa = min(max(sa, 0.0), length[ln])
        seg = int(np.searchsorted(c, sa, side="right")) - 1
        seg = min(max(seg, 0), count[ln] - 2)
        p0 = pts[seg]
        p1 = pts[seg + 1]
        seg_len = c[seg + 1] - c[seg]
        frac = (sa - c[seg]) / seg_len
        xy[a] = p0 + frac * (p1 - p0)
        heading[a] = np.arctan2(p1[1] - p0[1], p1[0] - p0[0])
    return xy, heading


def _advance_np(lane, s, ds, length, closed, successor, successor_s):
    lane = lane.copy()
    s = s + ds
    for i in range(lane.shape[0]):
        for _ in range(8):
            ln = lane[i]
            if closed[ln]:
                s[i] = s[i] % length[ln]
                break
            if s[i] < length[ln]:
                break
            over = s[i] - length[ln]
            if successor[ln] < 0:
                s[i] = over
            else:
                s[i] = successor_s[ln] + over
                lane[i] = successor[ln]
    return lane, s


def _ego_np(pos, heading, v, d, table, ahead_heading, v_max, hw):
    n = pos.shape[0]
    own = np.stack([v / v_max, d / hw, (hw - d) / hw, (hw + d) / hw], axis=1)
    rel = ahead_heading - heading[:, None]
    lane_feats = np.stack([np.cos(rel), np.sin(rel)], axis=2).reshape(n, -1)
    valid = table >= 0
    j = np.where(valid, table, 0)
    delta = pos[j] - pos[:, None, :]
    c, sn = np.cos(heading)[:, None], np.sin(heading)[:, None]
    rel_h = heading[j] - heading[:, None]
    blocks = np.stack(
        [
            c * delta[..., 0] + sn * delta[..., 1],
            -sn * delta[..., 0] + c * delta[..., 1],
            v[j] / v_max,
            np.cos(rel_h),
            np.sin(rel_h),
        ],
        axis=2,
    )
    blocks[~valid] = 0.0
    return np.concatenate([own, lane_feats, blocks.reshape(n, -1)], axis=1)


numpy_kernels = types.SimpleNamespace(
    advance_lanes=_advance_np,
    ego_observation=_ego_np,
    gae=_gae_np,
    pairwise_distances=_pairwise_np,
    collision_flags=_collisions_np,
    nearest_neighbors=_knn_np,
    lane_positions=_lanes_np,
)


# --------------------------------------------------------------------------
# numba path
# --------------------------------------------------------------------------

def _build_numba():
    from numba import njit

    @njit(cache=True)
    def gae_nb(rewards, values, next_values, dones, ends, gamma, lam):
        T, n = values.shape
        adv = np.zeros((T, n))
        running = np.zeros(n)
        for t in range(T - 1, -1, -1):
            if ends[t]:
                boot = 0.0 if dones[t] else 1.0
                for j in range(n):
                    delta = rewards[t] + gamma * boot * next_values[t, j] - values[t, j]
                    running[j] = delta
                    adv[t, j] = delta
            else:
                for j in range(n):
                    delta = rewards[t] + gamma * values[t + 1, j] - values[t, j]
                    running[j] = delta + gamma * lam * running[j]
                    adv[t, j] = running[j]
        return adv

    @njit(cache=True)
    def pairwise_nb(pos):
        n = pos.shape[0]
        d = np.zeros((n, n))
        for i in range(n):
            for j in range(i + 1, n):
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                r = np.sqrt(dx * dx + dy * dy)
                d[i, j] = r
                d[j, i] = r
        return d

    @njit(cache=True)
    def collisions_nb(pos, radius):
        n = pos.shape[0]
        out = np.zeros(n, dtype=np.bool_)
        lim = 2.0 * radius
        for i in range(n):
            for j in range(i + 1, n):
                dx = pos[i, 0] - pos[j, 0]
                dy = pos[i, 1] - pos[j, 1]
                if np.sqrt(dx * dx + dy * dy) < lim:
                    out[i] = True
                    out[j] = True
        return out

    @njit(cache=True)
    def knn_nb(pos, k, max_range):
        n = pos.shape[0]
        d = pairwise_nb(pos)
        out = np.full((n, k), -1, dtype=np.int64)
        for i in range(n):
            others = np.empty(n - 1, dtype=np.int64)
            dist = np.empty(n - 1)
            m = 0
            for j in range(n):
                if j != i:
                    others[m] = j
                    dist[m] = d[i, j]
                    m += 1
            order = np.argsort(dist, kind="mergesort")
            filled = 0
            for q in range(min(k, n - 1)):
                idx = order[q]
                if dist[idx] <= max_range:
                    out[i, filled] = others[idx]
                    filled += 1
        return out

    @njit(cache=True)
    def lanes_nb(points, cum, start, count, length, closed, lane_idx, s):
        n = lane_idx.shape[0]
        xy = np.empty((n, 2))
        heading = np.empty(n)
        for a in range(n):
            ln = lane_idx[a]
            lo = start[ln]
            cnt = count[ln]
            sa = s[a]
            if closed[ln]:
                sa = sa % length[ln]
            else:
                sa = min(max(sa, 0.0), length[ln])
            seg = np.searchsorted(cum[lo : lo + cnt], sa, side="right") - 1
            seg = min(max(seg, 0), cnt - 2)
            x0 = points[lo + seg, 0]
            y0 = points[lo + seg, 1]
            x1 = points[lo + seg + 1, 0]
            y1 = points[lo + seg + 1, 1]
            seg_len = cum[lo + seg + 1] - cum[lo + seg]
            frac = (sa - cum[lo + seg]) / seg_len
            xy[a, 0] = x0 + frac * (x1 - x0)
            xy[a, 1] = y0 + frac * (y1 - y0)
            heading[a] = np.arctan2(y1 - y0, x1 - x0)
        return xy, heading

    @njit(cache=True)
    def advance_nb(lane, s, ds, length, closed, successor, successor_s):
        lane = lane.copy()
        s = s + ds
        for i in range(lane.shape[0]):
            for _ in range(8):
                ln = lane[i]
                if closed[ln]:
                    s[i] = s[i] % length[ln]
                    break
                if s[i] < length[ln]:
                    break
                over = s[i] - length[ln]
                if successor[ln] < 0:
                    s[i] = over
                else:
                    s[i] = successor_s[ln] + over
                    lane[i] = successor[ln]
        return lane, s

    @njit(cache=True)
    def ego_nb(pos, heading, v, d, table, ahead_heading, v_max, hw):
        n = pos.shape[0]
        k = table.shape[1]
        la = ahead_heading.shape[1]
        out = np.zeros((n, 4 + 2 * la + 5 * k))
        for i in range(n):
            out[i, 0] = v[i] / v_max
            out[i, 1] = d[i] / hw
            out[i, 2] = (hw - d[i]) / hw
            out[i, 3] = (hw + d[i]) / hw
            h = heading[i]
            for q in range(la):
                r = ahead_heading[i, q] - h
                out[i, 4 + 2 * q] = np.cos(r)
                out[i, 5 + 2 * q] = np.sin(r)
            c = np.cos(h)
            sn = np.sin(h)
            base = 4 + 2 * la
            for q in range(k):
                j = table[i, q]
                if j < 0:
                    continue
                dx = pos[j, 0] - pos[i, 0]
                dy = pos[j, 1] - pos[i, 1]
                rh = heading[j] - h
                o = base + 5 * q
                out[i, o] = c * dx + sn * dy
                out[i, o + 1] = -sn * dx + c * dy
                out[i, o + 2] = v[j] / v_max
                out[i, o + 3] = np.cos(rh)
                out[i, o + 4] = np.sin(rh)
        return out

    return types.SimpleNamespace(
        advance_lanes=advance_nb,
        ego_observation=ego_nb,
        gae=gae_nb,
        pairwise_distances=pairwise_nb,
        collision_flags=collisions_nb,
        nearest_neighbors=knn_nb,
        lane_positions=lanes_nb,
    )


try:
    numba_kernels = _build_numba()
except ImportError:  # pragma: no cover - numba is an optional accelerator
    numba_kernels = None

_disabled = os.environ.get("XPMARL_DISABLE_NUMBA", "0") not in ("", "0")
_active = numpy_kernels if (_disabled or numba_kernels is None) else numba_kernels
BACKEND = "numpy" if _active is numpy_kernels else "numba"


def gae(rewards, values, next_values, dones, ends, gamma, lam):
    """Raw GAE advantages, shape ``(T, N)``.

    ``ends[t]`` marks the last stored step of an episode (terminal or
    truncated); ``dones[t]`` marks a true terminal, where no bootstrap from
    ``next_values[t]`` is applied.
    """
    return _active.gae(
        np.ascontiguousarray(rewards, dtype=np.float64),
        np.ascontiguousarray(values, dtype=np.float64),
        np.ascontiguousarray(next_values, dtype=np.float64),
        np.ascontiguousarray(dones, dtype=np.bool_),
        np.ascontiguousarray(ends, dtype=np.bool_),
        float(gamma),
        float(lam),
    )


def pairwise_distances(pos):
    return _active.pairwise_distances(np.ascontiguousarray(pos, dtype=np.float64))


def collision_flags(pos, radius):
    """Per-agent flag: True if any other center lies closer than ``2 * radius``."""
    return _active.collision_flags(np.ascontiguousarray(pos, dtype=np.float64), float(radius))


def nearest_neighbors(pos, k, max_range=np.inf):
    """``(N, k)`` neighbor indices by distance, ties by ascending index, -1 padded."""
    return _active.nearest_neighbors(
        np.ascontiguousarray(pos, dtype=np.float64), int(k), float(max_range)
    )


def lane_positions(points, cum, start, count, length, closed, lane_idx, s):
    return _active.lane_positions(
        points, cum, start, count, length, closed,
        np.ascontiguousarray(lane_idx, dtype=np.int64),
        np.ascontiguousarray(s, dtype=np.float64),
    )


def advance_lanes(lane, s, ds, length, closed, successor, successor_s):
    """Move each agent ``ds`` metres along its lane, following successors."""
    return _active.advance_lanes(
        np.ascontiguousarray(lane, dtype=np.int64),
        np.ascontiguousarray(s, dtype=np.float64),
        np.ascontiguousarray(ds, dtype=np.float64),
        length, closed, successor, successor_s,
    )


def ego_observation(pos, heading, v, d, table, ahead_heading, v_max, hw):
    return _active.ego_observation(
        pos, heading, v, d,
        np.ascontiguousarray(table, dtype=np.int64),
        np.ascontiguousarray(ahead_heading, dtype=np.float64),
        float(v_max), float(hw),
    )
