"""Small feed-forward network engine written directly on numpy.

Covers what the ultrasound-to-speech pipeline needs and nothing more:
dense layers with Swish or linear activations, MSE loss with an L2 weight
penalty, backpropagation, Adam, early stopping on a development set and a
compact binary model format.

Weight matrices are stored as ``(output_dim, input_dim)`` and inputs are
row-major batches ``(n_samples, input_dim)``, so a layer computes
``x @ W.T + b``.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from numba import njit
from scipy.special import expit

log = logging.getLogger(__name__)

ACTIVATIONS = ("swish", "linear")

MODEL_MAGIC = b"AESSI"
MODEL_VERSION = 1
_ACT_CODES = {"linear": 0, "swish": 1}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


class ModelFormatError(ValueError):
    """Raised when a model file is malformed, truncated or of a foreign format."""


class TrainingError(RuntimeError):
    """Raised when training diverges (non-finite loss)."""


def swish(x, beta=1.0):
    """Swish activation ``x * logistic(beta * x)``; beta=1 gives SiLU."""
    return x * expit(beta * x)


def swish_grad(x, beta=1.0):
    s = expit(beta * x)
    return s + beta * x * s * (1.0 - s)


@dataclass(frozen=True)
class LayerSpec:
    input_dim: int
    output_dim: int
    activation: str = "swish"
    beta: float = 1.0

    def __post_init__(self):
        if self.input_dim <= 0 or self.output_dim <= 0:
            raise ValueError(f"layer dims must be positive, got {self.input_dim}->{self.output_dim}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        if self.activation == "swish" and not self.beta > 0:
            raise ValueError(f"swish beta must be > 0, got {self.beta}")

    def activate(self, z):
        if self.activation == "linear":
            return z
        return swish(z, self.beta)

    def activate_grad(self, z):
        if self.activation == "linear":
            return np.ones_like(z)
        return swish_grad(z, self.beta)


def layer_chain(dims: Sequence[int], hidden_activation: str = "swish",
                output_activation: str = "linear", beta: float = 1.0) -> list[LayerSpec]:
    """Layer specs for the dims chain ``dims[0] -> ... -> dims[-1]``."""
    if len(dims) < 2:
        raise ValueError("need at least an input and an output dimension")
    specs = []
    for k, (din, dout) in enumerate(zip(dims[:-1], dims[1:])):
        act = output_activation if k == len(dims) - 2 else hidden_activation
        specs.append(LayerSpec(int(din), int(dout), act, beta))
    return specs


class MlpModel:
    """Layered perceptron: parameters plus the per-layer activation tags."""

    def __init__(self, layers: Sequence[LayerSpec], weights: Sequence[np.ndarray],
                 biases: Sequence[np.ndarray]):
        layers = list(layers)
        if not layers:
            raise ValueError("model needs at least one layer")
        if not (len(layers) == len(weights) == len(biases)):
            raise ValueError("layers, weights and biases must have equal length")
        for k in range(len(layers) - 1):
            if layers[k].output_dim != layers[k + 1].input_dim:
                raise ValueError(
                    f"layer {k} output_dim {layers[k].output_dim} does not match "
                    f"layer {k + 1} input_dim {layers[k + 1].input_dim}")
        for k, (spec, w, b) in enumerate(zip(layers, weights, biases)):
            if w.shape != (spec.output_dim, spec.input_dim):
                raise ValueError(f"layer {k}: weight shape {w.shape}, expected "
                                 f"{(spec.output_dim, spec.input_dim)}")
            if b.shape != (spec.output_dim,):
                raise ValueError(f"layer {k}: bias shape {b.shape}, expected ({spec.output_dim},)")
            if not np.all(np.isfinite(w)) or not np.all(np.isfinite(b)):
                raise ValueError(f"layer {k}: non-finite parameters")
        self.layers = layers
        self.weights = list(weights)
        self.biases = list(biases)

    @property
    def input_dim(self) -> int:
        return self.layers[0].input_dim

    @property
    def output_dim(self) -> int:
        return self.layers[-1].output_dim

    @property
    def dims(self) -> list[int]:
        return [self.layers[0].input_dim] + [s.output_dim for s in self.layers]

    @property
    def dtype(self):
        return self.weights[0].dtype

    def copy(self) -> MlpModel:
        return MlpModel(self.layers, [w.copy() for w in self.weights],
                        [b.copy() for b in self.biases])

    def astype(self, dtype) -> MlpModel:
        return MlpModel(self.layers, [w.astype(dtype) for w in self.weights],
                        [b.astype(dtype) for b in self.biases])

    def parameters(self) -> list[np.ndarray]:
        """Weights and biases interleaved: ``[W0, b0, W1, b1, ...]``."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def equals(self, other: MlpModel) -> bool:
        if self.layers != other.layers:
            return False
        return all(np.array_equal(p, q) for p, q in zip(self.parameters(), other.parameters()))

    def forward(self, x: np.ndarray) -> np.ndarray:
        return forward(self, x)

    def __repr__(self):
        arch = "->".join(str(d) for d in self.dims)
        return f"MlpModel({arch}, dtype={self.dtype})"


def init_mlp(layers: Sequence[LayerSpec], seed: int = 0, dtype=np.float32) -> MlpModel:
    """He-style uniform initialisation, ``U(-sqrt(6/fan_in), sqrt(6/fan_in))``; zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for spec in layers:
        limit = math.sqrt(6.0 / spec.input_dim)
        w = rng.uniform(-limit, limit, size=(spec.output_dim, spec.input_dim))
        weights.append(w.astype(dtype))
        biases.append(np.zeros(spec.output_dim, dtype=dtype))
    return MlpModel(layers, weights, biases)


def _as_batch(model: MlpModel, x) -> tuple[np.ndarray, bool]:
    x = np.asarray(x)
    single = x.ndim == 1
    if single:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != model.input_dim:
        raise ValueError(f"input shape {x.shape if not single else x.shape[1:]} does not match "
                         f"model input_dim {model.input_dim}")
    return x.astype(model.dtype, copy=False), single


def forward(model: MlpModel, x) -> np.ndarray:
    """Output activations for a single vector or a batch of row vectors."""
    a, single = _as_batch(model, x)
    for spec, w, b in zip(model.layers, model.weights, model.biases):
        a = spec.activate(a @ w.T + b)
    return a[0] if single else a


def forward_trace(model: MlpModel, x: np.ndarray):
    """Forward pass keeping every pre-activation and activation (batch input)."""
    a, _ = _as_batch(model, x)
    zs, acts = [], [a]
    for spec, w, b in zip(model.layers, model.weights, model.biases):
        z = a @ w.T + b
        a = spec.activate(z)
        zs.append(z)
        acts.append(a)
    return zs, acts


def mse_loss(pred, target) -> float:
    pred = np.asarray(pred)
    target = np.asarray(target)
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    diff = pred.astype(np.float64) - target
    return float(np.mean(diff * diff))


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def parameters(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


def regularized_loss(model: MlpModel, x, target, l2_lambda: float = 0.0) -> float:
    """``mean((f(x) - target)^2) + l2_lambda * sum(W^2)`` over all weight matrices."""
    loss = mse_loss(forward(model, x), target)
    if l2_lambda:
        loss += l2_lambda * sum(float(np.sum(w.astype(np.float64) ** 2)) for w in model.weights)
    return loss


def backward(model: MlpModel, x, target, l2_lambda: float = 0.0) -> tuple[float, Gradients]:
    """Data loss and gradients of ``regularized_loss``.

    The MSE averages over every element of the batch, so for a single
    sample the output-layer bias gradient is ``2 * (pred - target) / dim``.
    The L2 penalty is ``lambda * ||W||^2`` and contributes ``2 * lambda * W``;
    biases are not penalised.
    """
    x, single = _as_batch(model, x)
    target = np.asarray(target, dtype=model.dtype)
    if single:
        target = target[None, :]
    if target.shape != (x.shape[0], model.output_dim):
        raise ValueError(f"target shape {target.shape} does not match "
                         f"{(x.shape[0], model.output_dim)}")
    zs, acts = forward_trace(model, x)
    diff = acts[-1] - target
    loss = float(np.mean(diff.astype(np.float64) ** 2))
    delta = (2.0 / diff.size) * diff
    n = len(model.layers)
    gw: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    gb: list[np.ndarray] = [None] * n  # type: ignore[list-item]
    for k in range(n - 1, -1, -1):
        spec = model.layers[k]
        if spec.activation != "linear":
            delta = delta * spec.activate_grad(zs[k])
        gw[k] = delta.T @ acts[k]
        gb[k] = delta.sum(axis=0)
        if l2_lambda:
            gw[k] = gw[k] + (2.0 * l2_lambda) * model.weights[k]
        if k > 0:
            delta = delta @ model.weights[k]
    return loss, Gradients(gw, gb)


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    l2_lambda: float = 1e-5
    batch_size: int = 128
    max_epochs: int = 100
    patience: int = 10
    seed: int = 0

    def __post_init__(self):
        if not self.learning_rate >= 0:
            raise ValueError("learning_rate must be >= 0")
        for name in ("adam_beta1", "adam_beta2"):
            v = getattr(self, name)
            if not 0.0 <= v < 1.0:
                raise ValueError(f"{name} must lie in [0, 1), got {v}")
        if not self.adam_epsilon > 0:
            raise ValueError("adam_epsilon must be > 0")
        if self.l2_lambda < 0:
            raise ValueError("l2_lambda must be >= 0")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 0:
            raise ValueError("batch_size and max_epochs must be >= 1, patience >= 0")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")

    def with_updates(self, **kw) -> TrainConfig:
        return replace(self, **kw)


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0

    @classmethod
    def zeros_like(cls, model: MlpModel) -> AdamState:
        params = model.parameters()
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], 0)


def adam_step(model: MlpModel, state: AdamState, grads: Gradients, cfg: TrainConfig) -> None:
    """One bias-corrected Adam update, applied in place to ``model`` and ``state``."""
    params = model.parameters()
    gs = grads.parameters()
    if len(params) != len(state.m) or any(p.shape != m.shape for p, m in zip(params, state.m)):
        raise ValueError("Adam state does not match model parameter shapes")
    if any(p.shape != g.shape for p, g in zip(params, gs)):
        raise ValueError("gradient shapes do not match model parameter shapes")
    state.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    step = cfg.learning_rate / c1
    for p, g, m, v in zip(params, gs, state.m, state.v):
        if p.flags.c_contiguous and m.flags.c_contiguous and v.flags.c_contiguous:
            # fused single pass; the numpy form below makes ~10 full-size temporaries
            # constants in the parameter dtype keep float32 models in float32 arithmetic
            k = p.dtype.type
            _adam_kernel(p.reshape(-1), np.ascontiguousarray(g, dtype=p.dtype).reshape(-1),
                         m.reshape(-1), v.reshape(-1), k(b1), k(1.0 - b1), k(b2), k(1.0 - b2),
                         k(step), k(c2), k(cfg.adam_epsilon))
            continue
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= (step * m / (np.sqrt(v / c2) + cfg.adam_epsilon)).astype(p.dtype, copy=False)


@njit(cache=True)
def _adam_kernel(p, g, m, v, b1, a1, b2, a2, step, c2, eps):
    for i in range(p.size):
        gi = g[i]
        m[i] = b1 * m[i] + a1 * gi
        v[i] = b2 * v[i] + a2 * (gi * gi)
        p[i] -= step * m[i] / (np.sqrt(v[i] / c2) + eps)


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    dev_loss: float | None

    def as_dict(self) -> dict:
        return {"epoch": self.epoch, "train_loss": self.train_loss, "dev_loss": self.dev_loss}


@dataclass
class TrainResult:
    model: MlpModel
    history: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_loss: float = math.inf


def batched_mse(model: MlpModel, x: np.ndarray, y: np.ndarray, batch_size: int = 1024) -> float:
    total = 0.0
    for i in range(0, len(x), batch_size):
        d = forward(model, x[i:i + batch_size]).astype(np.float64) - y[i:i + batch_size]
        total += float(np.sum(d * d))
    return total / y.size


def train(model: MlpModel, x: np.ndarray, y: np.ndarray, cfg: TrainConfig,
          dev: tuple[np.ndarray, np.ndarray] | None = None,
          on_epoch: Callable[[EpochRecord, MlpModel], None] | None = None) -> TrainResult:
    """Minibatch Adam with patience-based early stopping.

    The returned model is the snapshot with the lowest development loss
    (training loss when ``dev`` is None); ``model`` itself is not modified.
    Shuffling is driven by ``cfg.seed`` only, so repeated runs are
    bit-identical. ``on_epoch(record, current_model)`` is called after every
    epoch; it must not modify the model.
    """
    x = np.asarray(x)
    y = np.asarray(y)
    if len(x) == 0:
        raise ValueError("empty training set")
    if len(x) != len(y):
        raise ValueError(f"{len(x)} inputs but {len(y)} targets")
    if cfg.batch_size > len(x):
        raise ValueError(f"batch_size {cfg.batch_size} exceeds dataset size {len(x)}")
    x = x.astype(model.dtype, copy=False)
    y = y.astype(model.dtype, copy=False)
    if dev is not None:
        dev = (np.asarray(dev[0], dtype=model.dtype), np.asarray(dev[1], dtype=model.dtype))
        if len(dev[0]) == 0:
            dev = None

    work = model.copy()
    state = AdamState.zeros_like(work)
    rng = np.random.default_rng(cfg.seed)
    result = TrainResult(model=model.copy())
    since_best = 0
    n = len(x)
    for epoch in range(1, cfg.max_epochs + 1):
        order = rng.permutation(n)
        losses = []
        for i in range(0, n, cfg.batch_size):
            idx = order[i:i + cfg.batch_size]
            loss, grads = backward(work, x[idx], y[idx], cfg.l2_lambda)
            if not math.isfinite(loss):
                raise TrainingError(f"non-finite training loss at epoch {epoch}, batch {i // cfg.batch_size}")
            adam_step(work, state, grads, cfg)
            losses.append(loss * len(idx))
        train_loss = float(sum(losses) / n)
        dev_loss = batched_mse(work, *dev) if dev is not None else None
        if dev_loss is not None and not math.isfinite(dev_loss):
            raise TrainingError(f"non-finite development loss at epoch {epoch}")
        rec = EpochRecord(epoch, train_loss, dev_loss)
        result.history.append(rec)
        if on_epoch is not None:
            on_epoch(rec, work)
        log.debug("epoch %d train %.6g dev %s", epoch, train_loss, dev_loss)
        score = dev_loss if dev_loss is not None else train_loss
        if score < result.best_loss:
            result.best_loss = score
            result.best_epoch = epoch
            result.model = work.copy()
            since_best = 0
        else:
            since_best += 1
            if since_best > cfg.patience:
                break
    return result


def count_weights(dims: Sequence[int], encoder: tuple[int, int] | None = None) -> int:
    """Number of weight-matrix entries (biases excluded) of the dims chain.

    ``encoder=(input_dim, N)`` adds the encoder matrix of an autoencoder
    whose bottleneck activations feed the chain.
    """
    dims = [int(d) for d in dims]
    if len(dims) < 2 or any(d <= 0 for d in dims):
        raise ValueError(f"invalid dims chain {dims}")
    total = sum(a * b for a, b in zip(dims[:-1], dims[1:]))
    if encoder is not None:
        total += int(encoder[0]) * int(encoder[1])
    return total


def save_model(model: MlpModel, path) -> None:
    """Write ``model`` as ``AESSI`` + version + layer table + little-endian float32 params."""
    parts = [MODEL_MAGIC, struct.pack("<BI", MODEL_VERSION, len(model.layers))]
    for spec in model.layers:
        parts.append(struct.pack("<IIBf", spec.input_dim, spec.output_dim,
                                 _ACT_CODES[spec.activation], spec.beta))
    for w, b in zip(model.weights, model.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    Path(path).write_bytes(b"".join(parts))


def load_model(path) -> MlpModel:
    data = Path(path).read_bytes()
    head = len(MODEL_MAGIC)
    if data[:head] != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: bad magic {data[:head]!r}")
    if len(data) < head + 5:
        raise ModelFormatError(f"{path}: truncated header")
    version, n_layers = struct.unpack_from("<BI", data, head)
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported format version {version}")
    off = head + 5
    rec = struct.calcsize("<IIBf")
    if len(data) < off + n_layers * rec:
        raise ModelFormatError(f"{path}: truncated layer table")
    layers = []
    for _ in range(n_layers):
        din, dout, code, beta = struct.unpack_from("<IIBf", data, off)
        off += rec
        if code not in _ACT_NAMES:
            raise ModelFormatError(f"{path}: unknown activation code {code}")
        layers.append(LayerSpec(din, dout, _ACT_NAMES[code], float(beta)))
    need = sum(4 * (s.input_dim * s.output_dim + s.output_dim) for s in layers)
    if len(data) - off < need:
        raise ModelFormatError(f"{path}: truncated parameters ({len(data) - off} of {need} bytes)")
    if len(data) - off > need:
        raise ModelFormatError(f"{path}: {len(data) - off - need} trailing bytes")
    weights, biases = [], []
    for s in layers:
        nw = s.input_dim * s.output_dim
        w = np.frombuffer(data, dtype="<f4", count=nw, offset=off).reshape(s.output_dim, s.input_dim)
        off += 4 * nw
        b = np.frombuffer(data, dtype="<f4", count=s.output_dim, offset=off)
        off += 4 * s.output_dim
        weights.append(w.astype(np.float32))
        biases.append(b.astype(np.float32))
    return MlpModel(layers, weights, biases)
