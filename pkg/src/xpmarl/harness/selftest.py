"""Numerical self-checks: gradients, advantage estimation and normalization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels
from ..envs import GridTraffic, NavGame
from ..mappo import MAPPOInstance, PPOConfig, normalize_advantages
from ..nn import gradient_check
from ..prioritization import SCORE_SPEC
from ..propagation import modified_dim

GRAD_TOL = 1e-4
GAE_TOL = 1e-9
NORM_TOL = 1e-6


@dataclass
class Check:
    name: str
    value: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(np.isfinite(self.value) and self.value < self.tolerance)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.3e} (< {self.tolerance:g})"


def gae_oracle(rewards, values, next_values, dones, ends, gamma, lam):
    """Advantages by explicit backward recursion, one episode segment at a time."""
    T = len(rewards)
    out = [0.0] * T

    def rec(t):
        boot = 0.0 if dones[t] else next_values[t] if ends[t] else values[t + 1]
        delta = rewards[t] + gamma * boot - values[t]
        if ends[t]:
            return delta
        return delta + gamma * lam * out[t + 1]

    for t in range(T - 1, -1, -1):
        out[t] = rec(t)
    return out


def _random_segments(rng, T):
    ends = rng.random(T) < 0.1
    ends[-1] = True
    dones = ends & (rng.random(T) < 0.5)
    return dones, ends


def gae_error(seed: int = 0, T: int = 257) -> float:
    rng = np.random.default_rng(seed)
    worst = 0.0
    for gamma, lam in ((0.99, 0.95), (0.0, 0.0), (0.9, 1.0)):
        r = rng.normal(size=T)
        v = rng.normal(size=T)
        nv = rng.normal(size=T)
        dones, ends = _random_segments(rng, T)
        ref = np.array(gae_oracle(r, v, nv, dones, ends, gamma, lam))
        for backend in (kernels.numpy_kernels, kernels.numba_kernels):
            if backend is None:
                continue
            got = backend.gae(r, v[:, None], nv[:, None], dones, ends, gamma, lam)[:, 0]
            worst = max(worst, float(np.max(np.abs(got - ref))))
    return worst


def normalization_error(seed: int = 0) -> float:
    rng = np.random.default_rng(seed)
    adv = rng.normal(3.0, 7.0, size=4096)
    z = normalize_advantages(adv)
    return max(abs(float(z.mean())), abs(float(z.std()) - 1.0))


def _instance_checks(tag: str, inst: MAPPOInstance, rng, batch_steps: int = 3):
    n = inst.num_agents
    obs = rng.normal(size=(batch_steps * n, inst.obs_dim))
    noise = inst.actor.draw_noise(rng, len(obs))
    _, raw, logp = inst.actor.sample(obs, noise)
    # old log-probs near the current ones keep every ratio off the clip boundary
    logp_old = logp + rng.uniform(-0.05, 0.05, size=logp.shape)
    adv = rng.normal(size=len(obs))

    def actor_fn(theta):
        saved = inst.actor.params.copy()
        inst.actor.params[...] = theta
        loss, grad, _ = inst.actor_loss_and_grad(obs, raw, logp_old, adv)
        inst.actor.params[...] = saved
        return loss, grad

    joint = obs.reshape(batch_steps, -1)
    v0 = inst.values(joint)
    v_old = v0 + rng.uniform(-0.05, 0.05, size=batch_steps)
    returns = rng.normal(size=batch_steps)

    def critic_fn(theta):
        saved = inst.critic.params.copy()
        inst.critic.params[...] = theta
        loss, grad, _ = inst.critic_loss_and_grad(joint, v_old, returns)
        inst.critic.params[...] = saved
        return loss, grad

    return [
        Check(f"grad {tag} actor", gradient_check(actor_fn, inst.actor.params), GRAD_TOL),
        Check(f"grad {tag} critic", gradient_check(critic_fn, inst.critic.params), GRAD_TOL),
    ]


def deployed_instances(cfg: PPOConfig | None = None, seed: int = 0):
    """Every (name, MAPPOInstance) shape the harness trains by default."""
    cfg = cfg or PPOConfig()
    rng = np.random.default_rng(seed)
    out = []
    for env in (NavGame(), GridTraffic(num_agents=4)):
        k = 1 if isinstance(env, NavGame) else env.k_obs
        name = type(env).__name__
        d_dim = modified_dim(env.obs_dim, k, env.action_spec)
        out.append((f"{name} decision", MAPPOInstance(d_dim, env.num_agents, env.action_spec, cfg, rng)))
        out.append((f"{name} priority", MAPPOInstance(env.obs_dim, env.num_agents, SCORE_SPEC, cfg, rng)))
    return out


def run_selftest(seed: int = 0, instances=None) -> list[Check]:
    rng = np.random.default_rng(seed)
    checks = [Check("gae vs recursive oracle", gae_error(seed), GAE_TOL),
              Check("advantage normalization", normalization_error(seed), NORM_TOL)]
    for tag, inst in instances or deployed_instances(seed=seed):
        checks.extend(_instance_checks(tag, inst, rng))
    return checks
