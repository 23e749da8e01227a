"""Compare the numba and numpy kernel paths.

    python benchmarks/bench_kernels.py [--agents 15] [--repeat 200]

Per-kernel timings come from calling both implementations directly. The
end-to-end row runs environment steps in a subprocess per backend, since the
backend is fixed at import time by XPMARL_DISABLE_NUMBA.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from xpmarl import kernels
from xpmarl.envs import GridTraffic

STEP_SNIPPET = """
import time, numpy as np
from xpmarl.envs import GridTraffic
env = GridTraffic(num_agents={n}, horizon=10**9)
env.reset(0)
rng = np.random.default_rng(0)
a = rng.uniform(-1, 1, size=(2000, {n}, 2)) * env.action_spec.high
env.step(a[0])
t = time.perf_counter()
for k in range(1, 2000):
    env.step(a[k])
print((time.perf_counter() - t) / 1999 * 1e6)
"""


def kernel_cases(n, rng):
    env = GridTraffic(num_agents=n, horizon=10**9)
    env.reset(0)
    g = env.graph
    pos = rng.uniform(0, 5, size=(n, 2))
    T = 2048
    r = rng.normal(size=T)
    v = rng.normal(size=(T, 1))
    nv = rng.normal(size=(T, 1))
    ends = rng.random(T) < 0.01
    ends[-1] = True
    dones = ends & (rng.random(T) < 0.5)
    lane = env.state.lane
    s = env.state.s
    ds = np.full(n, 0.05)
    table = kernels.nearest_neighbors(pos, 2)
    ahead = rng.uniform(-np.pi, np.pi, size=(n, 2))
    return {
        "gae(T=2048)": ("gae", (r, v, nv, dones, ends, 0.99, 0.95)),
        "pairwise_distances": ("pairwise_distances", (pos,)),
        "collision_flags": ("collision_flags", (pos, 0.06)),
        "nearest_neighbors(k=2)": ("nearest_neighbors", (pos, 2, np.inf)),
        "advance_lanes": ("advance_lanes", (lane, s, ds, g.length, g.closed, g.successor, g.successor_s)),
        "ego_observation": ("ego_observation", (pos, rng.uniform(-3, 3, n), rng.uniform(0, 1, n),
                                                rng.uniform(-0.1, 0.1, n), table, ahead, 1.0, 0.08)),
    }


def bench(fn, args, repeat):
    fn(*args)  # compile / warm up
    return min(timeit.repeat(lambda: fn(*args), number=repeat, repeat=5)) / repeat * 1e6


def env_step_us(n, disable):
    env = dict(os.environ, XPMARL_DISABLE_NUMBA="1" if disable else "0")
    out = subprocess.run([sys.executable, "-c", STEP_SNIPPET.format(n=n)], env=env,
                         capture_output=True, text=True, check=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--agents", type=int, default=15)
    ap.add_argument("--repeat", type=int, default=200)
    args = ap.parse_args()
    if kernels.numba_kernels is None:
        sys.exit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    print(f"{'kernel':<24}{'numpy us':>12}{'numba us':>12}{'speedup':>10}")
    for name, (attr, kargs) in kernel_cases(args.agents, rng).items():
        t_np = bench(getattr(kernels.numpy_kernels, attr), kargs, args.repeat)
        t_nb = bench(getattr(kernels.numba_kernels, attr), kargs, args.repeat)
        print(f"{name:<24}{t_np:>12.2f}{t_nb:>12.2f}{t_np / t_nb:>10.1f}")
    t_np = env_step_us(args.agents, True)
    t_nb = env_step_us(args.agents, False)
    print(f"{'env.step (end to end)':<24}{t_np:>12.2f}{t_nb:>12.2f}{t_np / t_nb:>10.1f}")


if __name__ == "__main__":
    main()
