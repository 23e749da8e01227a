"""Small fully connected networks with hand-written backpropagation.

Parameters live in one flat float64 vector; per-layer weights and biases are
views into it, so optimizers, hashing and finite-difference checks operate on
a single array.
"""

from __future__ import annotations

import hashlib
from typing import Callable, Sequence

import numpy as np

_ACTIVATIONS = {
    "tanh": (np.tanh, lambda z, a: 1.0 - a * a),
    "relu": (lambda z: np.maximum(z, 0.0), lambda z, a: (z > 0).astype(np.float64)),
    "linear": (lambda z: z, lambda z, a: np.ones_like(z)),
}


class MLP:
    """``sizes = [in, h1, ..., out]``; hidden layers use ``activation``, output is linear."""

    def __init__(
        self,
        sizes: Sequence[int],
        activation: str = "tanh",
        rng: np.random.Generator | None = None,
        out_gain: float = 1.0,
    ) -> None:
        if len(sizes) < 2:
            raise ValueError("an MLP needs at least input and output sizes")
        if activation not in _ACTIVATIONS:
            raise ValueError(f"unknown activation {activation!r}")
        self.sizes = tuple(int(s) for s in sizes)
        self.activation = activation
        self._act, self._dact = _ACTIVATIONS[activation]
        self.shapes = [(a, b) for a, b in zip(self.sizes[:-1], self.sizes[1:])]
        self.num_params = sum(a * b + b for a, b in self.shapes)
        self.params = np.zeros(self.num_params)
        self.W: list[np.ndarray] = []
        self.b: list[np.ndarray] = []
        off = 0
        for a, b in self.shapes:
            self.W.append(self.params[off : off + a * b].reshape(a, b))
            off += a * b
            self.b.append(self.params[off : off + b])
            off += b
        if rng is not None:
            self.init(rng, out_gain)

    @property
    def in_dim(self) -> int:
        return self.sizes[0]

    @property
    def out_dim(self) -> int:
        return self.sizes[-1]

    @property
    def descriptor(self) -> dict:
        return {"sizes": list(self.sizes), "activation": self.activation}

    def init(self, rng: np.random.Generator, out_gain: float = 1.0) -> None:
        last = len(self.shapes) - 1
        for k, (a, b) in enumerate(self.shapes):
            limit = np.sqrt(6.0 / (a + b)) if a + b > 0 else 0.0
            gain = out_gain if k == last else 1.0
            self.W[k][...] = gain * rng.uniform(-limit, limit, size=(a, b))
            self.b[k][...] = 0.0

    def set_params(self, flat: np.ndarray) -> None:
        flat = np.asarray(flat, dtype=np.float64)
        if flat.shape != self.params.shape:
            raise ValueError(f"expected {self.params.shape} parameters, got {flat.shape}")
        self.params[...] = flat

    def forward(self, x: np.ndarray) -> tuple[np.ndarray, list]:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 2 or x.shape[1] != self.in_dim:
            raise ValueError(f"MLP expects input of shape (B, {self.in_dim}), got {x.shape}")
        acts = [x]
        pre = []
        h = x
        last = len(self.shapes) - 1
        for k in range(len(self.shapes)):
            z = h @ self.W[k] + self.b[k]
            if k < last:
                pre.append(z)
                h = self._act(z)
                acts.append(h)
            else:
                h = z
        return h, [acts, pre]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: list, grad_out: np.ndarray, want_input_grad: bool = False):
        """Gradient of ``sum(grad_out * output)`` w.r.t. the flat parameters."""
        acts, pre = cache
        grad = np.zeros(self.num_params)
        gW, gb = [], []
        off = 0
        for a, b in self.shapes:
            gW.append(grad[off : off + a * b].reshape(a, b))
            off += a * b
            gb.append(grad[off : off + b])
            off += b
        g = np.asarray(grad_out, dtype=np.float64)
        for k in range(len(self.shapes) - 1, -1, -1):
            gW[k][...] = acts[k].T @ g
            gb[k][...] = g.sum(axis=0)
            if k > 0 or want_input_grad:
                g = g @ self.W[k].T
                if k > 0:
                    g = g * self._dact(pre[k - 1], acts[k])
        if want_input_grad:
            return grad, g
        return grad


def params_digest(params: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(params, dtype=np.float64).tobytes()).hexdigest()


class Adam:
    """Adam with optional global-norm gradient clipping; updates in place."""

    def __init__(self, size: int, lr: float = 3e-4, betas=(0.9, 0.999), eps: float = 1e-8,
                 max_grad_norm: float | None = 0.5) -> None:
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.max_grad_norm = max_grad_norm
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> float:
        norm = float(np.sqrt(grad @ grad))
        if self.max_grad_norm is not None and norm > self.max_grad_norm:
            grad = grad * (self.max_grad_norm / (norm + 1e-12))
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad * grad
        mhat = self.m / (1 - self.b1**self.t)
        vhat = self.v / (1 - self.b2**self.t)
        params -= self.lr * mhat / (np.sqrt(vhat) + self.eps)
        return norm

    def state_dict(self) -> dict:
        return {"m": self.m.copy(), "v": self.v.copy(), "t": self.t}

    def load_state_dict(self, state: dict) -> None:
        self.m = np.array(state["m"], dtype=np.float64)
        self.v = np.array(state["v"], dtype=np.float64)
        self.t = int(state["t"])


def gradient_check(
    loss_and_grad: Callable[[np.ndarray], tuple[float, np.ndarray]],
    point: np.ndarray,
    epsilon: float = 1e-5,
    floor: float = 1e-8,
) -> float:
    """Max relative error between the analytic gradient and central differences.

    ``loss_and_grad(theta)`` must not keep references to ``theta``; every
    coordinate of ``point`` is perturbed.
    """
    if not 1e-7 <= epsilon <= 1e-3:
        raise ValueError("epsilon must lie in [1e-7, 1e-3]")
    theta = np.array(point, dtype=np.float64)
    _, analytic = loss_and_grad(theta.copy())
    analytic = np.asarray(analytic, dtype=np.float64)
    worst = 0.0
    for i in range(theta.size):
        up = theta.copy()
        up[i] += epsilon
        dn = theta.copy()
        dn[i] -= epsilon
        numeric = (loss_and_grad(up)[0] - loss_and_grad(dn)[0]) / (2 * epsilon)
        denom = max(abs(analytic[i]) + abs(numeric), floor)
        worst = max(worst, abs(analytic[i] - numeric) / denom)
    return worst
