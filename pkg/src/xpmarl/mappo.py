"""MAPPO learner: shared decentralized actor plus a centralized critic."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kernels
from .nn import MLP, Adam, params_digest
from .policies import make_policy

log = logging.getLogger(__name__)


class DivergenceError(RuntimeError):
    """A loss or parameter became non-finite during an update."""

    def __init__(self, message: str, diagnostics: dict | None = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass
class PPOConfig:
    lr: float = 3e-4
    critic_lr: float | None = None
    clip: float = 0.2
    gamma: float = 0.99
    lam: float = 0.95
    epochs: int = 4
    minibatch: int = 64
    ent_coef: float = 0.01
    vf_coef: float = 0.5
    max_grad_norm: float | None = 0.5
    hidden: tuple[int, ...] = (64, 64)
    rollout: int = 1024
    init_log_std: float = -0.5

    @classmethod
    def from_dict(cls, d: dict) -> "PPOConfig":
        d = dict(d)
        if "hidden" in d:
            d["hidden"] = tuple(int(h) for h in d["hidden"])
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown ppo keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d


@dataclass
class RolloutBuffer:
    """Per-step storage for one MAPPO instance (``N`` agents per step)."""

    obs: list = field(default_factory=list)
    raw: list = field(default_factory=list)
    log_probs: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    values: list = field(default_factory=list)
    next_values: list = field(default_factory=list)
    dones: list = field(default_factory=list)
    ends: list = field(default_factory=list)

    def add(self, obs, raw, log_probs, reward, value, done, end=False, next_value=0.0) -> None:
        self.obs.append(np.array(obs, dtype=np.float64))
        self.raw.append(np.array(raw))
        self.log_probs.append(np.array(log_probs, dtype=np.float64))
        self.rewards.append(float(reward))
        self.values.append(float(value))
        self.dones.append(bool(done))
        self.ends.append(bool(end or done))
        self.next_values.append(float(next_value))

    def mark_end(self, next_value: float) -> None:
        """Close the trailing partial episode, bootstrapping from ``next_value``."""
        if self.ends and not self.ends[-1]:
            self.ends[-1] = True
            self.next_values[-1] = float(next_value)

    def __len__(self) -> int:
        return len(self.rewards)

    def clear(self) -> None:
        for f in self.__dataclass_fields__:
            getattr(self, f).clear()


def compute_gae(buffer: RolloutBuffer, gamma: float, lam: float) -> tuple[np.ndarray, np.ndarray]:
    """Raw advantages and returns (``advantages + values``), each of shape ``(T,)``.

    The last stored step must close an episode (see :meth:`RolloutBuffer.mark_end`).
    """
    if len(buffer) == 0:
        raise ValueError("cannot compute advantages of an empty buffer")
    if not buffer.ends[-1]:
        raise ValueError("buffer does not end on an episode boundary")
    values = np.asarray(buffer.values)[:, None]
    adv = kernels.gae(
        np.asarray(buffer.rewards),
        values,
        np.asarray(buffer.next_values)[:, None],
        np.asarray(buffer.dones),
        np.asarray(buffer.ends),
        gamma,
        lam,
    )[:, 0]
    return adv, adv + values[:, 0]


def normalize_advantages(adv: np.ndarray) -> np.ndarray:
    std = adv.std()
    if std < 1e-12:
        return adv - adv.mean()
    return (adv - adv.mean()) / std


def clipped_surrogate(logp, logp_old, adv, clip):
    """Clipped policy loss, its gradient w.r.t. ``logp`` and the clip fraction."""
    ratio = np.exp(logp - logp_old)
    unclipped = ratio * adv
    clipped = np.clip(ratio, 1.0 - clip, 1.0 + clip) * adv
    loss = -np.mean(np.minimum(unclipped, clipped))
    active = unclipped <= clipped
    dlogp = np.where(active, -adv * ratio, 0.0) / len(adv)
    clip_frac = float(np.mean(np.abs(ratio - 1.0) > clip))
    return float(loss), dlogp, clip_frac


def clipped_value_loss(v, v_old, returns, clip):
    v_clip = v_old + np.clip(v - v_old, -clip, clip)
    a = (v - returns) ** 2
    b = (v_clip - returns) ** 2
    loss = 0.5 * np.mean(np.maximum(a, b))
    use_a = a >= b
    inside = np.abs(v - v_old) <= clip
    dv = np.where(use_a | inside, v - returns, 0.0) / len(v)
    return float(loss), dv


class MAPPOInstance:
    """One actor-critic problem; all agents share ``actor.params``.

    The critic sees the concatenation of every agent's actor input (ordered by
    agent id) and predicts a single team value per step.
    """

    def __init__(self, obs_dim: int, num_agents: int, action_spec, cfg: PPOConfig,
                 rng: np.random.Generator, name: str = "decision") -> None:
        self.name = name
        self.cfg = cfg
        self.obs_dim = obs_dim
        self.num_agents = num_agents
        self.action_spec = action_spec
        self.actor = make_policy(obs_dim, action_spec, cfg.hidden, rng)
        if hasattr(self.actor, "log_std"):
            self.actor.log_std[...] = cfg.init_log_std
        self.critic = MLP([obs_dim * num_agents, *cfg.hidden, 1], "tanh", rng, out_gain=1.0)
        self.actor_opt = Adam(self.actor.params.size, cfg.lr, max_grad_norm=cfg.max_grad_norm)
        self.critic_opt = Adam(self.critic.num_params, cfg.critic_lr or cfg.lr,
                               max_grad_norm=cfg.max_grad_norm)
        self.buffer = RolloutBuffer()
        self.updates = 0

    # -- acting -------------------------------------------------------------

    def value(self, joint_obs: np.ndarray) -> float:
        return float(self.critic(np.asarray(joint_obs).reshape(1, -1))[0, 0])

    def values(self, joint_obs_batch: np.ndarray) -> np.ndarray:
        x = np.asarray(joint_obs_batch).reshape(len(joint_obs_batch), -1)
        return self.critic(x)[:, 0]

    def act(self, obs: np.ndarray, rng: np.random.Generator | None, deterministic: bool = False):
        noise = None if deterministic else self.actor.draw_noise(rng, obs.shape[0])
        return self.actor.sample(obs, noise, deterministic)

    def architecture(self) -> dict:
        return {"actor": self.actor.descriptor, "critic": self.critic.descriptor}

    def digest(self) -> str:
        return params_digest(np.concatenate([self.actor.params, self.critic.params]))

    # -- learning -----------------------------------------------------------

    def actor_loss_and_grad(self, obs, raw, logp_old, adv):
        logp, ent, cache = self.actor.evaluate(obs, raw)
        ploss, dlogp, clip_frac = clipped_surrogate(logp, logp_old, adv, self.cfg.clip)
        entropy = float(ent.mean())
        loss = ploss - self.cfg.ent_coef * entropy
        dent = np.full(len(ent), -self.cfg.ent_coef / len(ent))
        grad = self.actor.backward(cache, dlogp, dent)
        return loss, grad, {"policy_loss": ploss, "entropy": entropy, "clip_fraction": clip_frac,
                            "approx_kl": float(np.mean(logp_old - logp))}

    def critic_loss_and_grad(self, joint_obs, v_old, returns):
        v, cache = self.critic.forward(joint_obs)
        loss, dv = clipped_value_loss(v[:, 0], v_old, returns, self.cfg.clip)
        grad = self.critic.backward(cache, self.cfg.vf_coef * dv[:, None])
        return self.cfg.vf_coef * loss, grad, loss

    def update(self, rng: np.random.Generator) -> dict:
        """Clipped-surrogate PPO update on the stored rollout, then clear it."""
        buf = self.buffer
        cfg = self.cfg
        adv_raw, returns = compute_gae(buf, cfg.gamma, cfg.lam)
        adv = normalize_advantages(adv_raw)
        T, n = len(buf), self.num_agents
        obs = np.stack(buf.obs)  # (T, N, d)
        raw = np.stack(buf.raw)
        logp_old = np.stack(buf.log_probs)  # (T, N)
        v_old = np.asarray(buf.values)
        joint = obs.reshape(T, -1)
        steps_per_mb = max(1, cfg.minibatch // n)
        stats = {"policy_loss": [], "value_loss": [], "entropy": [], "clip_fraction": [], "approx_kl": []}
        for _ in range(cfg.epochs):
            perm = rng.permutation(T)
            for lo in range(0, T, steps_per_mb):
                idx = perm[lo : lo + steps_per_mb]
                mb_obs = obs[idx].reshape(len(idx) * n, -1)
                mb_raw = raw[idx].reshape(len(idx) * n, *raw.shape[2:])
                mb_adv = np.repeat(adv[idx], n)
                _, agrad, info = self.actor_loss_and_grad(mb_obs, mb_raw, logp_old[idx].reshape(-1), mb_adv)
                _, cgrad, vloss = self.critic_loss_and_grad(joint[idx], v_old[idx], returns[idx])
                info["value_loss"] = vloss
                if not all(np.isfinite(v) for v in info.values()) or not (
                    np.all(np.isfinite(agrad)) and np.all(np.isfinite(cgrad))
                ):
                    raise DivergenceError(f"{self.name}: non-finite loss in update {self.updates}", info)
                self.actor_opt.step(self.actor.params, agrad)
                self.actor.post_update()
                self.critic_opt.step(self.critic.params, cgrad)
                for k, v in info.items():
                    stats[k].append(v)
        buf.clear()
        self.updates += 1
        out = {k: float(np.mean(v)) for k, v in stats.items()}
        out["adv_mean"] = float(adv_raw.mean())
        log.debug("%s update %d: %s", self.name, self.updates, out)
        return out

    # -- persistence --------------------------------------------------------

    def state_arrays(self, prefix: str) -> dict[str, np.ndarray]:
        out = {
            f"{prefix}.actor": self.actor.params.copy(),
            f"{prefix}.critic": self.critic.params.copy(),
        }
        for tag, opt in (("actor_opt", self.actor_opt), ("critic_opt", self.critic_opt)):
            st = opt.state_dict()
            out[f"{prefix}.{tag}.m"] = st["m"]
            out[f"{prefix}.{tag}.v"] = st["v"]
            out[f"{prefix}.{tag}.t"] = np.array(st["t"])
        return out

    def load_arrays(self, arrays, prefix: str) -> None:
        self.actor.params[...] = arrays[f"{prefix}.actor"]
        self.critic.params[...] = arrays[f"{prefix}.critic"]
        for tag, opt in (("actor_opt", self.actor_opt), ("critic_opt", self.critic_opt)):
            opt.load_state_dict({k: arrays[f"{prefix}.{tag}.{k}"] for k in ("m", "v", "t")})
