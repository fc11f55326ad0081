"""Small trainable noise predictor with manual backpropagation.

Two tanh hidden layers over [latent, sinusoidal time embedding, label
one-hot].  Gradients are hand-derived and checked against finite differences
in the test suite; Adam is the training optimizer, plain SGD exists for the
gradient-check path.  Checkpoints are flat little-endian float64 blobs with
a versioned header.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .denoisers import Denoiser, gmm_sample
from .errors import ParameterError, TrainingDivergedError

CHECKPOINT_MAGIC = b"MLPD"
CHECKPOINT_VERSION = 1

# Weight arrays in declaration (= checkpoint) order.
_PARAM_NAMES = ("w1", "b1", "w2", "b2", "w3", "b3")


@dataclass
class MlpParams:
    d: int
    hidden: int
    label_count: int
    t_emb: int
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    w3: np.ndarray
    b3: np.ndarray

    @property
    def input_width(self) -> int:
        return self.d + self.t_emb + self.label_count

    def arrays(self):
        return [getattr(self, name) for name in _PARAM_NAMES]

    def copy(self) -> "MlpParams":
        return MlpParams(
            self.d, self.hidden, self.label_count, self.t_emb,
            *[a.copy() for a in self.arrays()],
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 2e-3
    batch_size: int = 256
    iterations: int = 6000
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate < 0:
            raise ParameterError(f"learning rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1 or self.iterations < 1:
            raise ParameterError("batch size and iterations must be positive")


def init_mlp(d, hidden, label_count, rng, t_emb=16) -> MlpParams:
    """Glorot-uniform weights, zero biases; deterministic given the stream."""
    if d < 1 or hidden < 1:
        raise ParameterError(f"d and hidden must be >= 1, got d={d}, hidden={hidden}")
    if label_count < 0 or t_emb < 2 or t_emb % 2 != 0:
        raise ParameterError(f"bad label_count={label_count} or t_emb={t_emb}")
    n_in = d + t_emb + label_count

    def glorot(fan_in, fan_out):
        a = np.sqrt(6.0 / (fan_in + fan_out))
        return rng.uniform(-a, a, size=(fan_in, fan_out))

    return MlpParams(
        d=int(d), hidden=int(hidden), label_count=int(label_count), t_emb=int(t_emb),
        w1=glorot(n_in, hidden), b1=np.zeros(hidden),
        w2=glorot(hidden, hidden), b2=np.zeros(hidden),
        w3=glorot(hidden, d), b3=np.zeros(d),
    )


def glorot_bound(fan_in: int, fan_out: int) -> float:
    """Half-width of the init interval; every initial weight lies inside it."""
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def time_embedding(t, width):
    """Sinusoidal features of the raw training step, fixed geometric frequencies."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    half = width // 2
    freqs = np.exp(-np.log(10000.0) * np.arange(half) / max(half - 1, 1))
    arg = t[:, None] * freqs[None, :]
    return np.concatenate([np.sin(arg), np.cos(arg)], axis=1)


def _one_hot(cond, label_count, n):
    out = np.zeros((n, label_count))
    if cond is None or label_count == 0:
        return out
    idx = np.broadcast_to(np.asarray(cond, dtype=int), (n,))
    if np.any((idx < 0) | (idx >= label_count)):
        raise ParameterError(f"label out of range 0..{label_count - 1}")
    out[np.arange(n), idx] = 1.0
    return out


def _forward(params, z, t, cond):
    n = z.shape[0]
    x = np.concatenate(
        [z, time_embedding(np.broadcast_to(t, (n,)), params.t_emb),
         _one_hot(cond, params.label_count, n)], axis=1
    )
    h1 = np.tanh(x @ params.w1 + params.b1)
    h2 = np.tanh(h1 @ params.w2 + params.b2)
    out = h2 @ params.w3 + params.b3
    return out, (x, h1, h2)


def mlp_predict(params, z, t, cond=None):
    """Deterministic forward pass; accepts a single vector or a batch."""
    z = np.asarray(z, dtype=float)
    single = z.ndim == 1
    zb = z[None, :] if single else z
    if zb.shape[-1] != params.d:
        raise ParameterError(f"z has dimension {zb.shape[-1]}, network expects {params.d}")
    out, _ = _forward(params, zb, t, cond)
    return out[0] if single else out


def loss_and_grads(params, z_t, t, cond, eps_target):
    """Squared-error loss mean over batch and dimensions, with gradients."""
    out, (x, h1, h2) = _forward(params, z_t, t, cond)
    resid = out - eps_target
    loss = float(np.mean(resid * resid))
    g_out = 2.0 * resid / resid.size
    g_w3 = h2.T @ g_out
    g_b3 = g_out.sum(axis=0)
    g_h2 = g_out @ params.w3.T
    g_a2 = g_h2 * (1.0 - h2 * h2)
    g_w2 = h1.T @ g_a2
    g_b2 = g_a2.sum(axis=0)
    g_h1 = g_a2 @ params.w2.T
    g_a1 = g_h1 * (1.0 - h1 * h1)
    g_w1 = x.T @ g_a1
    g_b1 = g_a1.sum(axis=0)
    return loss, [g_w1, g_b1, g_w2, g_b2, g_w3, g_b3]


def sgd_step(params, grads, learning_rate):
    """Plain gradient descent update, in place."""
    for arr, g in zip(params.arrays(), grads):
        arr -= learning_rate * g


class _Adam:
    def __init__(self, cfg, shapes):
        self.cfg = cfg
        self.m = [np.zeros(s) for s in shapes]
        self.v = [np.zeros(s) for s in shapes]
        self.step_count = 0

    def step(self, arrays, grads):
        c = self.cfg
        self.step_count += 1
        bc1 = 1.0 - c.beta1 ** self.step_count
        bc2 = 1.0 - c.beta2 ** self.step_count
        for arr, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= c.beta1
            m += (1.0 - c.beta1) * g
            v *= c.beta2
            v += (1.0 - c.beta2) * g * g
            arr -= c.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + c.eps)


def train_denoiser(params, source, schedule, cfg: TrainConfig):
    """Denoising-objective training loop.

    Each step draws z0 from the source, a uniform step t in 1..t_train and
    fresh noise, forms z_t by the reparameterized forward process, and takes
    one Adam step on ||eps - net(z_t, t)||^2.  Returns the trained copy and
    the per-iteration loss trace.
    """
    if source.d != params.d:
        raise ParameterError(f"source dimension {source.d} != network dimension {params.d}")
    params = params.copy()
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed))
    adam = _Adam(cfg, [a.shape for a in params.arrays()])
    ab = schedule.alpha_bars
    trace = np.empty(cfg.iterations)
    for i in range(cfg.iterations):
        z0 = gmm_sample(source, cfg.batch_size, rng)
        t = rng.integers(1, schedule.t_train + 1, size=cfg.batch_size)
        eps = rng.standard_normal((cfg.batch_size, params.d))
        z_t = np.sqrt(ab[t])[:, None] * z0 + np.sqrt(1.0 - ab[t])[:, None] * eps
        loss, grads = loss_and_grads(params, z_t, t, None, eps)
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite loss at iteration {i}", loss_trace=trace[:i].copy()
            )
        trace[i] = loss
        adam.step(params.arrays(), grads)
    return params, trace


class MlpDenoiser(Denoiser):
    def __init__(self, params: MlpParams):
        self.params = params

    def predict(self, z, t, cond=None):
        return mlp_predict(self.params, z, t, cond)


def save_checkpoint(params: MlpParams, path):
    """Write magic, version, layer sizes, then float64-LE weights in order."""
    header = struct.pack(
        "<4sIIIII", CHECKPOINT_MAGIC, CHECKPOINT_VERSION,
        params.d, params.hidden, params.label_count, params.t_emb,
    )
    with open(path, "wb") as fh:
        fh.write(header)
        for arr in params.arrays():
            fh.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> MlpParams:
    with open(path, "rb") as fh:
        blob = fh.read()
    head_size = struct.calcsize("<4sIIIII")
    if len(blob) < head_size:
        raise ParameterError(f"checkpoint {path} is truncated")
    magic, version, d, hidden, label_count, t_emb = struct.unpack(
        "<4sIIIII", blob[:head_size]
    )
    if magic != CHECKPOINT_MAGIC:
        raise ParameterError(f"bad checkpoint magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise ParameterError(f"unsupported checkpoint version {version}")
    n_in = d + t_emb + label_count
    shapes = [(n_in, hidden), (hidden,), (hidden, hidden), (hidden,), (hidden, d), (d,)]
    arrays = []
    offset = head_size
    for shape in shapes:
        count = int(np.prod(shape))
        arrays.append(
            np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
            .astype(float).reshape(shape)
        )
        offset += count * 8
    if offset != len(blob):
        raise ParameterError(f"checkpoint {path} has trailing or missing bytes")
    return MlpParams(d, hidden, label_count, t_emb, *arrays)
