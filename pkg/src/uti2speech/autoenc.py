"""Single-bottleneck autoencoder used as an ultrasound feature extractor.

The network is ``input_dim -> N (swish) -> input_dim (linear)`` trained to
reproduce its input; after training only the first layer (the encoder) is
used, and its swish activations are the per-frame features.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .nncore import LayerSpec, MlpModel, TrainConfig, TrainResult, forward, init_mlp, train

PIXELS = 64 * 128


@dataclass
class AutoencoderConfig:
    input_dim: int = PIXELS
    bottleneck: int = 256
    beta: float = 1.0
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        if not 0 < self.bottleneck < self.input_dim:
            raise ValueError(f"bottleneck N={self.bottleneck} must satisfy 0 < N < {self.input_dim}")


def build_autoencoder(cfg: AutoencoderConfig, seed: int | None = None) -> MlpModel:
    layers = [LayerSpec(cfg.input_dim, cfg.bottleneck, "swish", cfg.beta),
              LayerSpec(cfg.bottleneck, cfg.input_dim, "linear")]
    return init_mlp(layers, cfg.train.seed if seed is None else seed)


def encoder_weight_count(input_dim: int, bottleneck: int) -> int:
    return input_dim * bottleneck


def check_autoencoder(model: MlpModel) -> None:
    ok = (len(model.layers) == 2
          and model.input_dim == model.output_dim
          and model.layers[0].output_dim < model.input_dim
          and model.layers[1].activation == "linear")
    if not ok:
        raise ValueError(f"{model!r} is not a single-bottleneck autoencoder")


def _flatten(frames) -> np.ndarray:
    frames = np.asarray(frames)
    if frames.ndim == 1:
        return frames[None, :]
    return frames.reshape(len(frames), -1)


def train_autoencoder(frames, cfg: AutoencoderConfig, dev_frames=None,
                      model: MlpModel | None = None, on_epoch=None) -> TrainResult:
    """Fit the autoencoder with inputs as targets; frames are flattened row-major.

    ``frames`` may be an array ``(n, 64, 128)`` / ``(n, 8192)`` or an iterable
    of such arrays (one per utterance), which are concatenated. A fresh model
    has its output bias set to the mean training frame.
    """
    x = _stack(frames)
    if x.shape[1] != cfg.input_dim:
        raise ValueError(f"frames have {x.shape[1]} pixels, config expects {cfg.input_dim}")
    dev = None
    if dev_frames is not None:
        xd = _stack(dev_frames)
        dev = (xd, xd)
    if model is None:
        model = build_autoencoder(cfg)
        # start the reconstruction at the mean frame so training spends its
        # steps on the variation rather than on the constant background
        model.biases[-1][:] = x.mean(axis=0)
    return train(model, x, x, cfg.train, dev, on_epoch)


def _stack(frames) -> np.ndarray:
    if isinstance(frames, np.ndarray):
        return _flatten(frames).astype(np.float32, copy=False)
    parts: Iterable = (_flatten(f) for f in frames)
    return np.concatenate(list(parts)).astype(np.float32, copy=False)


def encode(model: MlpModel, frames) -> np.ndarray:
    """Bottleneck activations, ``(n, N)`` (or ``(N,)`` for a single frame)."""
    check_autoencoder(model)
    frames = np.asarray(frames)
    single = frames.ndim == 1 or (frames.ndim == 2 and frames.size == model.input_dim
                                  and frames.shape[-1] != model.input_dim)
    x = frames.reshape(1, -1) if single else _flatten(frames)
    if x.shape[1] != model.input_dim:
        raise ValueError(f"frame has {x.shape[1]} values, model expects {model.input_dim}")
    spec = model.layers[0]
    h = spec.activate(x.astype(model.dtype) @ model.weights[0].T + model.biases[0])
    return h[0] if single else h


def decode(model: MlpModel, codes) -> np.ndarray:
    check_autoencoder(model)
    codes = np.asarray(codes, dtype=model.dtype)
    return codes @ model.weights[1].T + model.biases[1]


def reconstruct(model: MlpModel, frames) -> np.ndarray:
    """Full forward pass, reshaped like the input frames."""
    check_autoencoder(model)
    frames = np.asarray(frames)
    out = forward(model, _flatten(frames))
    return out.reshape(frames.shape)


def reconstruction_mse(model: MlpModel, frames) -> float:
    x = _stack(frames)
    total = 0.0
    for i in range(0, len(x), 512):
        d = forward(model, x[i:i + 512]).astype(np.float64) - x[i:i + 512]
        total += float(np.sum(d * d))
    return total / x.size
