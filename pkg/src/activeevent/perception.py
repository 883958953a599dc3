"""Feature encoding, one-step recurrent prediction and error-derived attention.

The encoder is a frozen random two-layer strided convolution with tanh
activations. The predictor is a GRU cell applied independently to every grid
cell with shared weights, followed by a linear readout added to the current
features (the readout models the change between frames).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericFault, ShapeError

log = logging.getLogger(__name__)

PREDICTOR_BLOCKS = ("w_x", "w_h", "b", "w_out", "b_out")
ENCODER_BLOCKS = ("enc_w1", "enc_b1", "enc_w2", "enc_b2")


@dataclass
class PerceptionConfig:
    feat_h: int = 7
    feat_w: int = 7
    feat_d: int = 16
    tau: float = 1.0
    learn_rate: float = 2e-3
    hidden_dim: int = 16
    encoder_seed: int = 0
    enc_channels: int = 8

    def validate(self) -> None:
        if not self.tau > 0:
            raise ConfigError("perception.tau", "must be > 0")
        if self.learn_rate < 0:
            raise ConfigError("perception.learn_rate", "must be >= 0")
        if self.feat_h * self.feat_w < 4:
            raise ConfigError("perception.feat_h", "feat_h * feat_w must be >= 4")
        if self.feat_d < 1 or self.hidden_dim < 1:
            raise ConfigError("perception.feat_d", "feat_d and hidden_dim must be >= 1")


@dataclass
class ErrorGrid:
    e: np.ndarray  # (h, w) per-cell squared error
    total: float


def sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def prediction_error(f: np.ndarray, f_hat: np.ndarray) -> ErrorGrid:
    """Per-cell squared distance summed over channels, plus the grid total."""
    f = np.asarray(f, dtype=np.float64)
    f_hat = np.asarray(f_hat, dtype=np.float64)
    if f.shape != f_hat.shape or f.ndim != 3:
        raise ShapeError(f"feature maps differ: {f.shape} vs {f_hat.shape}")
    diff = f - f_hat
    e = np.einsum("ijk,ijk->ij", diff, diff)
    return ErrorGrid(e=e, total=float(e.sum()))


def uncertainty_map(err, tau: float) -> np.ndarray:
    """Softmax of ``e / tau`` jointly over all grid cells."""
    if not tau > 0:
        raise ConfigError("perception.tau", "must be > 0")
    e = err.e if isinstance(err, ErrorGrid) else np.asarray(err, dtype=np.float64)
    z = e / tau
    z = z - z.max()
    w = np.exp(z)
    return w / w.sum()


def _uniform(rng, fan_in, shape):
    s = 1.0 / np.sqrt(fan_in)
    return rng.uniform(-s, s, size=shape)


def _split_patch(total: int, cells: int, axis: str) -> tuple[int, int]:
    if total % cells:
        raise ConfigError(f"perception.feat_{axis}", f"frame size {total} not divisible by {cells}")
    patch = total // cells
    k2 = 2 if patch % 2 == 0 else 1
    return patch // k2, k2


class Encoder:
    """Fixed random conv stack: frame (px, px) -> (feat_h, feat_w, feat_d)."""

    def __init__(self, cfg: PerceptionConfig, frame_px: int):
        self.frame_px = frame_px
        self.h, self.w, self.d = cfg.feat_h, cfg.feat_w, cfg.feat_d
        self.k1h, self.k2h = _split_patch(frame_px, cfg.feat_h, "h")
        self.k1w, self.k2w = _split_patch(frame_px, cfg.feat_w, "w")
        c1 = cfg.enc_channels
        rng = np.random.default_rng(cfg.encoder_seed)
        fan1 = self.k1h * self.k1w
        fan2 = self.k2h * self.k2w * c1
        self.w1 = _uniform(rng, fan1, (fan1, c1))
        self.b1 = _uniform(rng, fan1, (c1,))
        self.w2 = _uniform(rng, fan2, (fan2, self.d))
        self.b2 = _uniform(rng, fan2, (self.d,))

    def blocks(self) -> dict:
        return dict(zip(ENCODER_BLOCKS, (self.w1, self.b1, self.w2, self.b2)))

    def load_blocks(self, blocks: dict) -> None:
        self.w1, self.b1, self.w2, self.b2 = (np.array(blocks[k], dtype=np.float64) for k in ENCODER_BLOCKS)

    def __call__(self, obs: np.ndarray) -> np.ndarray:
        obs = np.asarray(obs, dtype=np.float64)
        if obs.shape != (self.frame_px, self.frame_px):
            raise ShapeError(f"observation shape {obs.shape}, expected {(self.frame_px, self.frame_px)}")
        m1h, m1w = self.h * self.k2h, self.w * self.k2w
        x = (obs - 0.5).reshape(m1h, self.k1h, m1w, self.k1w).transpose(0, 2, 1, 3)
        a1 = np.tanh(x.reshape(m1h, m1w, -1) @ self.w1 + self.b1)
        c1 = a1.shape[-1]
        x2 = a1.reshape(self.h, self.k2h, self.w, self.k2w, c1).transpose(0, 2, 1, 3, 4)
        return np.tanh(x2.reshape(self.h, self.w, -1) @ self.w2 + self.b2)


def init_predictor(cfg: PerceptionConfig, rng: np.random.Generator) -> dict:
    d, hd = cfg.feat_d, cfg.hidden_dim
    return {
        "w_x": _uniform(rng, d, (d, 3 * hd)),
        "w_h": _uniform(rng, hd, (hd, 3 * hd)),
        "b": np.zeros(3 * hd),
        "w_out": _uniform(rng, hd, (hd, d)),
        "b_out": np.zeros(d),
    }


def predictor_forward(params: dict, hidden: np.ndarray, f: np.ndarray):
    """One GRU step on every cell. Returns (f_hat, new_hidden, cache)."""
    h_, w_, d = f.shape
    hd = hidden.shape[-1]
    x = f.reshape(-1, d)
    h = hidden.reshape(-1, hd)
    gx = x @ params["w_x"] + params["b"]
    gh = h @ params["w_h"]
    z = sigmoid(gx[:, :hd] + gh[:, :hd])
    r = sigmoid(gx[:, hd : 2 * hd] + gh[:, hd : 2 * hd])
    n = np.tanh(gx[:, 2 * hd :] + r * gh[:, 2 * hd :])
    h_new = (1.0 - z) * n + z * h
    y = x + h_new @ params["w_out"] + params["b_out"]
    cache = (x, h, gh, z, r, n, h_new)
    return y.reshape(h_, w_, d), h_new.reshape(h_, w_, hd), cache


def predictor_backward(params: dict, cache, dy: np.ndarray) -> dict:
    """Gradients w.r.t. predictor params given dL/d(f_hat); hidden input is a constant."""
    x, h, gh, z, r, n, h_new = cache
    hd = h.shape[-1]
    dy = dy.reshape(-1, x.shape[-1])
    grads = {"w_out": h_new.T @ dy, "b_out": dy.sum(0)}
    dh_new = dy @ params["w_out"].T
    dn = dh_new * (1.0 - z)
    dz = dh_new * (h - n)
    dan = dn * (1.0 - n * n)
    dar = dan * gh[:, 2 * hd :] * r * (1.0 - r)
    daz = dz * z * (1.0 - z)
    dgx = np.concatenate([daz, dar, dan], axis=1)
    dgh = np.concatenate([daz, dar, dan * r], axis=1)
    grads["w_x"] = x.T @ dgx
    grads["b"] = dgx.sum(0)
    grads["w_h"] = h.T @ dgh
    return grads


def predictor_loss(params: dict, hidden: np.ndarray, f_t: np.ndarray, f_next: np.ndarray) -> float:
    f_hat, _, _ = predictor_forward(params, hidden, f_t)
    return prediction_error(f_next, f_hat).total


class Perception:
    """Encoder + online-trained predictor with an episode-scoped hidden state."""

    def __init__(self, cfg: PerceptionConfig, frame_px: int, seed: int = 0):
        cfg.validate()
        self.cfg = cfg
        self.encoder = Encoder(cfg, frame_px)
        self.params = init_predictor(cfg, np.random.default_rng(seed))
        self.hidden = np.zeros((cfg.feat_h, cfg.feat_w, cfg.hidden_dim))
        self.numeric_faults = 0

    def reset(self) -> None:
        self.hidden = np.zeros_like(self.hidden)

    def encode(self, obs: np.ndarray) -> np.ndarray:
        return self.encoder(obs)

    def predict_next(self, f_t: np.ndarray, hidden: np.ndarray | None = None):
        """Pure one-step prediction: (f_hat_next, new_hidden)."""
        hidden = self.hidden if hidden is None else hidden
        if not np.all(np.isfinite(hidden)):
            raise NumericFault("non-finite predictor hidden state")
        f_hat, h_new, _ = predictor_forward(self.params, hidden, f_t)
        if not np.all(np.isfinite(f_hat)):
            raise NumericFault("non-finite prediction")
        return f_hat, h_new

    def train_step(self, f_t: np.ndarray, f_next: np.ndarray, learn: bool = True):
        """Predict ``f_next`` from ``f_t``, update params, advance hidden.

        Returns (loss, ErrorGrid, f_hat) where the loss is measured before the
        parameter update.
        """
        if f_t.shape != f_next.shape:
            raise ShapeError(f"feature maps differ: {f_t.shape} vs {f_next.shape}")
        if not np.all(np.isfinite(self.hidden)):
            raise NumericFault("non-finite predictor hidden state")
        f_hat, h_new, cache = predictor_forward(self.params, self.hidden, f_t)
        err = prediction_error(f_next, f_hat)
        if learn and self.cfg.learn_rate > 0:
            grads = predictor_backward(self.params, cache, 2.0 * (f_hat - f_next))
            if all(np.all(np.isfinite(g)) for g in grads.values()):
                for k, g in grads.items():
                    self.params[k] -= self.cfg.learn_rate * g
            else:
                self.numeric_faults += 1
                log.warning("non-finite predictor gradient; update skipped")
        self.hidden = h_new
        return err.total, err, f_hat

    def blocks(self) -> dict:
        out = dict(self.encoder.blocks())
        out.update({k: self.params[k] for k in PREDICTOR_BLOCKS})
        return out

    def load_blocks(self, blocks: dict) -> None:
        self.encoder.load_blocks(blocks)
        for k in PREDICTOR_BLOCKS:
            self.params[k] = np.array(blocks[k], dtype=np.float64)
