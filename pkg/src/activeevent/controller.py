"""Q-learning controller driven by the attention peak's offset from the grid center."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .env import N_ACTIONS
from .errors import ConfigError, NumericFault, UsageError

QNET_BLOCKS = ("w_x", "w_h", "b", "w1", "b1", "w2", "b2", "w3", "b3")
REWARD_MODES = ("intrinsic", "extrinsic", "hybrid")


@dataclass
class DQNConfig:
    gamma: float = 0.99
    batch_size: int = 32
    buffer_capacity: int = 10_000
    learn_rate: float = 1e-3
    eps_start: float = 1.0
    eps_final: float = 0.02
    eps_decay_steps: int = 10_000
    target_sync_every: int = 1_000
    reward_mode: str = "intrinsic"
    hybrid_mix: float = 0.5
    agg_dim: int = 128
    max_grad_norm: float = 10.0

    def validate(self) -> None:
        if not 0 <= self.gamma < 1:
            raise ConfigError("dqn.gamma", "must lie in [0, 1)")
        if not 0 <= self.eps_final <= self.eps_start <= 1:
            raise ConfigError("dqn.eps_start", "need 0 <= eps_final <= eps_start <= 1")
        for name in ("batch_size", "buffer_capacity", "eps_decay_steps", "target_sync_every", "agg_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"dqn.{name}", "must be positive")
        if self.learn_rate < 0:
            raise ConfigError("dqn.learn_rate", "must be >= 0")
        if self.reward_mode not in REWARD_MODES:
            raise ConfigError("dqn.reward_mode", f"must be one of {REWARD_MODES}")
        if not 0 <= self.hybrid_mix <= 1:
            raise ConfigError("dqn.hybrid_mix", "must lie in [0, 1]")

    def epsilon(self, step: int) -> float:
        frac = min(1.0, max(0, step) / self.eps_decay_steps)
        return self.eps_start + frac * (self.eps_final - self.eps_start)


def intrinsic_reward(alpha: np.ndarray) -> tuple[float, tuple[int, int]]:
    """Negative distance (in cells) from the grid center to the alpha argmax.

    np.argmax returns the first maximum in row-major order, which is the
    tie rule.
    """
    h, w = alpha.shape
    i, j = np.unravel_index(int(np.argmax(alpha)), alpha.shape)
    ci, cj = (h - 1) / 2, (w - 1) / 2
    return -math.hypot(i - ci, j - cj), (int(i), int(j))


def combined_reward(intr: float, extr: float, mode: str = "intrinsic", mix: float = 0.5) -> float:
    if mode == "intrinsic":
        return intr
    if mode == "extrinsic":
        return extr
    if mode == "hybrid":
        return mix * extr + (1.0 - mix) * intr
    raise ConfigError("dqn.reward_mode", f"unknown mode {mode!r}")


def policy_input(f: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Flatten the policy state; alpha is rescaled so a uniform map reads 1."""
    return np.concatenate([f.ravel(), alpha.ravel() * alpha.size])


def select_action(q: np.ndarray, eps: float, rng: np.random.Generator) -> int:
    if not 0 <= eps <= 1:
        raise UsageError("eps must lie in [0, 1]")
    if eps > 0 and rng.random() < eps:
        return int(rng.integers(len(q)))
    return int(np.argmax(q))


def _uniform(rng, fan_in, shape):
    s = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class QNet:
    """flatten(state) -> GRU cell -> 256 -> 64 -> n_actions.

    The GRU's previous hidden state is an explicit input; gradients are not
    propagated into it.
    """

    def __init__(self, in_dim: int, agg_dim: int = 128, n_actions: int = N_ACTIONS, rng=None,
                 hidden_sizes=(256, 64)):
        rng = np.random.default_rng(0) if rng is None else rng
        H = agg_dim
        h1, h2 = hidden_sizes
        self.in_dim, self.agg_dim, self.n_actions = in_dim, H, n_actions
        self.params = {
            "w_x": _uniform(rng, in_dim, (in_dim, 3 * H)),
            "w_h": _uniform(rng, H, (H, 3 * H)),
            "b": np.zeros(3 * H),
            "w1": _uniform(rng, H, (H, h1)),
            "b1": np.zeros(h1),
            "w2": _uniform(rng, h1, (h1, h2)),
            "b2": np.zeros(h2),
            "w3": _uniform(rng, h2, (h2, n_actions)),
            "b3": np.zeros(n_actions),
        }

    def copy(self) -> "QNet":
        other = object.__new__(QNet)
        other.in_dim, other.agg_dim, other.n_actions = self.in_dim, self.agg_dim, self.n_actions
        other.params = {k: v.copy() for k, v in self.params.items()}
        return other

    def load_from(self, other: "QNet") -> None:
        for k, v in other.params.items():
            self.params[k][...] = v

    def zero_hidden(self) -> np.ndarray:
        return np.zeros(self.agg_dim)

    def forward(self, x: np.ndarray, h_prev: np.ndarray):
        """Batch or single forward. Returns (q, h_new, cache)."""
        p = self.params
        H = self.agg_dim
        gx = x @ p["w_x"] + p["b"]
        gh = h_prev @ p["w_h"]
        z = sigmoid(gx[..., :H] + gh[..., :H])
        r = sigmoid(gx[..., H : 2 * H] + gh[..., H : 2 * H])
        n = np.tanh(gx[..., 2 * H :] + r * gh[..., 2 * H :])
        h = (1.0 - z) * n + z * h_prev
        a1 = np.maximum(h @ p["w1"] + p["b1"], 0.0)
        a2 = np.maximum(a1 @ p["w2"] + p["b2"], 0.0)
        q = a2 @ p["w3"] + p["b3"]
        return q, h, (x, h_prev, gh, z, r, n, h, a1, a2)

    def q_values(self, x: np.ndarray, h_prev: np.ndarray):
        q, h, _ = self.forward(x, h_prev)
        if not np.all(np.isfinite(q)):
            raise NumericFault("non-finite Q-values")
        return q, h

    def backward(self, cache, dq: np.ndarray) -> dict:
        """Gradients of sum(dq * q) for a batch (2-D inputs)."""
        p = self.params
        x, h_prev, gh, z, r, n, h, a1, a2 = cache
        H = self.agg_dim
        g = {"w3": a2.T @ dq, "b3": dq.sum(0)}
        da2 = (dq @ p["w3"].T) * (a2 > 0)
        g["w2"] = a1.T @ da2
        g["b2"] = da2.sum(0)
        da1 = (da2 @ p["w2"].T) * (a1 > 0)
        g["w1"] = h.T @ da1
        g["b1"] = da1.sum(0)
        dh = da1 @ p["w1"].T
        dn = dh * (1.0 - z)
        dz = dh * (h_prev - n)
        dan = dn * (1.0 - n * n)
        dar = dan * gh[:, 2 * H :] * r * (1.0 - r)
        daz = dz * z * (1.0 - z)
        dgx = np.concatenate([daz, dar, dan], axis=1)
        dgh = np.concatenate([daz, dar, dan * r], axis=1)
        g["w_x"] = x.T @ dgx
        g["b"] = dgx.sum(0)
        g["w_h"] = h_prev.T @ dgh
        return g


class Adam:
    def __init__(self, params: dict, lr: float, b1=0.9, b2=0.999, eps=1e-8):
        self.lr, self.b1, self.b2, self.eps = lr, b1, b2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.b1**self.t
        c2 = 1.0 - self.b2**self.t
        for k, g in grads.items():
            m, v = self.m[k], self.v[k]
            m *= self.b1
            m += (1.0 - self.b1) * g
            v *= self.b2
            v += (1.0 - self.b2) * g * g
            params[k] -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


@dataclass
class Batch:
    """Column-stacked transitions: inputs, stored hiddens, actions, rewards, terminals."""

    x: np.ndarray
    h: np.ndarray
    a: np.ndarray
    r: np.ndarray
    x_next: np.ndarray
    h_next: np.ndarray
    terminal: np.ndarray

    def __len__(self) -> int:
        return len(self.a)


def td_targets(target_net: QNet, batch: Batch, gamma: float) -> np.ndarray:
    q_next, _, _ = target_net.forward(batch.x_next, batch.h_next)
    boot = np.where(batch.terminal, 0.0, q_next.max(axis=1))
    return batch.r + gamma * boot


def td_loss_and_grads(net: QNet, target_net: QNet, batch: Batch, gamma: float):
    """Mean squared TD error and its gradient w.r.t. ``net`` params."""
    if len(batch) == 0:
        raise UsageError("empty batch")
    y = td_targets(target_net, batch, gamma)
    q, _, cache = net.forward(batch.x, batch.h)
    idx = np.arange(len(batch))
    delta = q[idx, batch.a] - y
    loss = float(np.mean(delta**2))
    dq = np.zeros_like(q)
    dq[idx, batch.a] = 2.0 * delta / len(batch)
    return loss, net.backward(cache, dq), q


def td_update(net: QNet, target_net: QNet, batch: Batch, gamma: float, opt: Adam | None = None,
              max_grad_norm: float | None = None) -> float:
    """One gradient step on the batch TD loss; returns the loss before the step."""
    if opt is None:
        raise UsageError("td_update needs an optimizer")
    loss, grads, _ = td_loss_and_grads(net, target_net, batch, gamma)
    if not all(np.all(np.isfinite(g)) for g in grads.values()):
        raise NumericFault("non-finite TD gradient")
    if max_grad_norm:
        norm = math.sqrt(sum(float((g * g).sum()) for g in grads.values()))
        if norm > max_grad_norm:
            grads = {k: g * (max_grad_norm / norm) for k, g in grads.items()}
    opt.step(net.params, grads)
    return loss


class ReplayBuffer:
    """Fixed-capacity ring buffer; uniform sampling with replacement."""

    def __init__(self, capacity: int, in_dim: int, agg_dim: int, dtype=np.float32):
        if capacity < 1:
            raise ConfigError("dqn.buffer_capacity", "must be positive")
        self.capacity = capacity
        self.x = np.zeros((capacity, in_dim), dtype)
        self.x_next = np.zeros((capacity, in_dim), dtype)
        self.h = np.zeros((capacity, agg_dim), dtype)
        self.h_next = np.zeros((capacity, agg_dim), dtype)
        self.a = np.zeros(capacity, np.int64)
        self.r = np.zeros(capacity)
        self.terminal = np.zeros(capacity, bool)
        self.pos = 0
        self.size = 0

    def __len__(self) -> int:
        return self.size

    def push(self, x, h, a, r, x_next, h_next, terminal=False) -> None:
        if not math.isfinite(r):
            raise NumericFault("non-finite reward")
        i = self.pos
        self.x[i], self.h[i], self.a[i], self.r[i] = x, h, a, r
        self.x_next[i], self.h_next[i], self.terminal[i] = x_next, h_next, terminal
        self.pos = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample_indices(self, n: int, rng: np.random.Generator) -> np.ndarray:
        if self.size == 0:
            raise UsageError("cannot sample from an empty replay buffer")
        if n > self.size:
            raise UsageError(f"requested {n} samples from a buffer of {self.size}")
        return rng.integers(0, self.size, size=n)

    def get(self, idx) -> Batch:
        f8 = np.float64
        return Batch(
            self.x[idx].astype(f8), self.h[idx].astype(f8), self.a[idx], self.r[idx],
            self.x_next[idx].astype(f8), self.h_next[idx].astype(f8), self.terminal[idx],
        )

    def sample(self, n: int, rng: np.random.Generator) -> Batch:
        return self.get(self.sample_indices(n, rng))
