"""Stochastic policy heads on top of :class:`~xpmarl.nn.MLP`.

Every policy exposes the same surface used by the learner:

* ``sample(obs, noise, deterministic)`` turns pre-drawn base noise into
  actions, returning ``(actions, raw, log_probs)``. ``raw`` is what the
  learner stores (pre-squash Gaussian sample or action index).
* ``evaluate(obs, raw)`` returns log-probabilities, entropies and a cache.
* ``backward(cache, dlogp, dentropy)`` returns the flat parameter gradient.

Base noise is drawn by the caller so that the order of random draws does not
depend on how agents are batched.
"""

from __future__ import annotations

import numpy as np

from .nn import MLP
from .pomg import BoxSpec, DiscreteSpec

LOG_STD_MIN, LOG_STD_MAX = -5.0, 2.0
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _log1m_tanh_sq(u: np.ndarray) -> np.ndarray:
    """``log(1 - tanh(u)**2)`` without cancellation for large ``|u|``."""
    return 2.0 * (np.log(2.0) - u - np.logaddexp(0.0, -2.0 * u))


class GaussianPolicy:
    """Diagonal Gaussian over a pre-squash variable, tanh-squashed onto a box."""

    def __init__(self, obs_dim: int, spec: BoxSpec, hidden=(64, 64), rng=None,
                 init_log_std: float = -0.5, activation: str = "tanh") -> None:
        self.spec = spec
        self.obs_dim = obs_dim
        self.act_dim = spec.dim
        self.net = MLP([obs_dim, *hidden, spec.dim], activation, rng, out_gain=0.01)
        self.params = np.zeros(self.net.num_params + spec.dim)
        self.params[: self.net.num_params] = self.net.params
        self.net.params = self.params[: self.net.num_params]
        self._rebind()
        self.log_std[...] = init_log_std
        self.center = (spec.high + spec.low) / 2.0
        self.half = (spec.high - spec.low) / 2.0

    def _rebind(self) -> None:
        net = self.net
        off = 0
        for k, (a, b) in enumerate(net.shapes):
            net.W[k] = net.params[off : off + a * b].reshape(a, b)
            off += a * b
            net.b[k] = net.params[off : off + b]
            off += b
        self.log_std = self.params[net.num_params :]

    @property
    def descriptor(self) -> dict:
        return {"kind": "gaussian", **self.net.descriptor}

    def noise_shape(self, n: int) -> tuple[int, ...]:
        return (n, self.act_dim)

    def draw_noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.standard_normal(self.noise_shape(n))

    def squash(self, u: np.ndarray) -> np.ndarray:
        a = self.center + self.half * np.tanh(u)
        return np.clip(a, self.spec.low, self.spec.high)

    def _std(self) -> np.ndarray:
        return np.exp(np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX))

    def log_prob_raw(self, mean: np.ndarray, u: np.ndarray) -> np.ndarray:
        ls = np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)
        z = (u - mean) / np.exp(ls)
        base = -0.5 * z * z - ls - _HALF_LOG_2PI
        return (base - _log1m_tanh_sq(u) - np.log(self.half)).sum(axis=-1)

    def sample(self, obs: np.ndarray, noise: np.ndarray | None, deterministic: bool = False):
        mean = self.net(obs)
        u = mean if deterministic else mean + self._std() * noise
        return self.squash(u), u, self.log_prob_raw(mean, u)

    def mean_action(self, obs: np.ndarray) -> np.ndarray:
        return self.squash(self.net(obs))

    def evaluate(self, obs: np.ndarray, raw: np.ndarray):
        mean, cache = self.net.forward(obs)
        logp = self.log_prob_raw(mean, raw)
        ls = np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)
        ent = np.full(obs.shape[0], float(np.sum(ls + 0.5 + _HALF_LOG_2PI)))
        return logp, ent, (cache, mean, raw)

    def backward(self, cache, dlogp: np.ndarray, dentropy: np.ndarray) -> np.ndarray:
        net_cache, mean, u = cache
        ls = np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX)
        inside = (self.log_std > LOG_STD_MIN) & (self.log_std < LOG_STD_MAX)
        var = np.exp(2.0 * ls)
        diff = u - mean
        grad = np.zeros_like(self.params)
        grad[: self.net.num_params] = self.net.backward(net_cache, dlogp[:, None] * diff / var)
        dls = (dlogp[:, None] * (diff * diff / var - 1.0)).sum(axis=0) + dentropy.sum()
        grad[self.net.num_params :] = np.where(inside, dls, 0.0)
        return grad

    def post_update(self) -> None:
        np.clip(self.log_std, LOG_STD_MIN, LOG_STD_MAX, out=self.log_std)


class CategoricalPolicy:
    """Softmax over a finite action set."""

    def __init__(self, obs_dim: int, spec: DiscreteSpec, hidden=(64, 64), rng=None,
                 activation: str = "tanh") -> None:
        self.spec = spec
        self.obs_dim = obs_dim
        self.net = MLP([obs_dim, *hidden, spec.n], activation, rng, out_gain=0.01)
        self.params = self.net.params

    @property
    def descriptor(self) -> dict:
        return {"kind": "categorical", **self.net.descriptor}

    def noise_shape(self, n: int) -> tuple[int, ...]:
        return (n,)

    def draw_noise(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.random(n)

    @staticmethod
    def _log_softmax(logits: np.ndarray) -> np.ndarray:
        m = logits.max(axis=-1, keepdims=True)
        return logits - m - np.log(np.exp(logits - m).sum(axis=-1, keepdims=True))

    def probs(self, obs: np.ndarray) -> np.ndarray:
        return np.exp(self._log_softmax(self.net(obs)))

    def sample(self, obs: np.ndarray, noise: np.ndarray | None, deterministic: bool = False):
        logp_all = self._log_softmax(self.net(obs))
        if deterministic:
            idx = logp_all.argmax(axis=-1)
        else:
            cdf = np.cumsum(np.exp(logp_all), axis=-1)
            idx = np.minimum((noise[:, None] >= cdf).sum(axis=-1), self.spec.n - 1)
        logp = logp_all[np.arange(len(idx)), idx]
        return idx.astype(np.int64), idx.astype(np.int64), logp

    def mean_action(self, obs: np.ndarray) -> np.ndarray:
        return self._log_softmax(self.net(obs)).argmax(axis=-1)

    def evaluate(self, obs: np.ndarray, raw: np.ndarray):
        logits, cache = self.net.forward(obs)
        logp_all = self._log_softmax(logits)
        p = np.exp(logp_all)
        idx = np.asarray(raw, dtype=np.int64).reshape(-1)
        logp = logp_all[np.arange(len(idx)), idx]
        ent = -(p * logp_all).sum(axis=-1)
        return logp, ent, (cache, p, logp_all, idx, ent)

    def backward(self, cache, dlogp: np.ndarray, dentropy: np.ndarray) -> np.ndarray:
        net_cache, p, logp_all, idx, ent = cache
        onehot = np.zeros_like(p)
        onehot[np.arange(len(idx)), idx] = 1.0
        g = dlogp[:, None] * (onehot - p) - dentropy[:, None] * p * (logp_all + ent[:, None])
        return self.net.backward(net_cache, g)

    def post_update(self) -> None:
        pass


def make_policy(obs_dim: int, spec, hidden=(64, 64), rng=None):
    if isinstance(spec, BoxSpec):
        return GaussianPolicy(obs_dim, spec, hidden, rng)
    if isinstance(spec, DiscreteSpec):
        return CategoricalPolicy(obs_dim, spec, hidden, rng)
    raise TypeError(f"unsupported action spec {spec!r}")
