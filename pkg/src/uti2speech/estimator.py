"""Sliding-window regressor from per-frame features to MGC-LSP vectors.

Features are either autoencoder bottleneck activations (N per frame) or the
raw 8192 pixels (baseline). A window of ``w`` frames centred on frame t is
concatenated in temporal order and mapped by a 5x1024 Swish network to the
25 targets of frame t. Both the per-frame features and the targets are
z-scored per dimension with training-set statistics; predictions are mapped
back and their LSPs re-ordered before synthesis.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .evalmetrics import nmse
from .nncore import (EpochRecord, MlpModel, TrainConfig, count_weights, forward, init_mlp,
                     layer_chain, load_model, save_model, train)
from .vocoder.lsp import repair_lsp

WINDOW_WIDTHS = (1, 5, 9, 13, 17)
TARGET_DIM = 25
HIDDEN = 1024
DEPTH = 5
LSP_MIN_GAP = 1e-4


@dataclass(frozen=True)
class WindowSpec:
    width: int = 9
    edge_policy: str = "replicate"

    def __post_init__(self):
        if self.width < 1 or self.width % 2 == 0:
            raise ValueError(f"window width must be a positive odd integer, got {self.width}")
        if self.edge_policy != "replicate":
            raise ValueError(f"unsupported edge policy {self.edge_policy!r}")

    @property
    def radius(self) -> int:
        return (self.width - 1) // 2


def assemble_window(features, t: int, spec: WindowSpec) -> np.ndarray:
    """Frames ``t - r .. t + r`` concatenated; out-of-range indices clamp to the ends."""
    features = np.asarray(features)
    n = len(features)
    if not 0 <= t < n:
        raise IndexError(f"frame index {t} outside [0, {n})")
    idx = np.clip(np.arange(t - spec.radius, t + spec.radius + 1), 0, n - 1)
    return features[idx].reshape(-1)


def assemble_windows(features, spec: WindowSpec) -> np.ndarray:
    """All windows of an utterance at once, ``(T, w * dim)``."""
    features = np.asarray(features)
    n = len(features)
    offsets = np.arange(-spec.radius, spec.radius + 1)
    idx = np.clip(np.arange(n)[:, None] + offsets[None, :], 0, n - 1)
    return features[idx].reshape(n, -1)


def estimator_dims(input_dim: int, hidden: int = HIDDEN, depth: int = DEPTH,
                   output_dim: int = TARGET_DIM) -> list[int]:
    return [input_dim] + [hidden] * depth + [output_dim]


def build_estimator(input_dim: int, hidden: int = HIDDEN, depth: int = DEPTH,
                    output_dim: int = TARGET_DIM, beta: float = 1.0, seed: int = 0) -> MlpModel:
    if input_dim <= 0:
        raise ValueError("input_dim must be positive")
    return init_mlp(layer_chain(estimator_dims(input_dim, hidden, depth, output_dim), beta=beta), seed)


def system_weight_count(feature_dim: int, width: int, bottleneck_input: int | None = None,
                        hidden: int = HIDDEN, depth: int = DEPTH) -> int:
    """Weights of the estimator plus, for autoencoder features, the encoder matrix."""
    dims = estimator_dims(width * feature_dim, hidden, depth)
    enc = (bottleneck_input, feature_dim) if bottleneck_input else None
    return count_weights(dims, enc)


@dataclass
class ParallelUtterance:
    name: str
    features: np.ndarray   # (T, dim)
    targets: np.ndarray    # (T, 25)

    def __post_init__(self):
        if len(self.features) != len(self.targets):
            raise ValueError(f"{self.name}: {len(self.features)} feature frames vs "
                             f"{len(self.targets)} target frames")


@dataclass
class Estimator:
    model: MlpModel
    window: WindowSpec
    target_mean: np.ndarray
    target_std: np.ndarray
    feature_kind: str = "ae"
    feature_mean: np.ndarray | None = None
    feature_std: np.ndarray | None = None

    @property
    def feature_dim(self) -> int:
        return self.model.input_dim // self.window.width

    def predict_raw(self, features) -> np.ndarray:
        """De-standardised network outputs without LSP repair."""
        features = np.asarray(features, dtype=np.float32)
        if features.ndim != 2 or features.shape[1] * self.window.width != self.model.input_dim:
            raise ValueError(f"features {features.shape} do not fit model input "
                             f"{self.model.input_dim} with window {self.window.width}")
        x = assemble_windows(self.scale_features(features), self.window)
        out = np.concatenate([forward(self.model, x[i:i + 1024]) for i in range(0, len(x), 1024)])
        return out.astype(np.float64) * self.target_std + self.target_mean

    def scale_features(self, features) -> np.ndarray:
        if self.feature_mean is None:
            return np.asarray(features, dtype=np.float32)
        return ((features - self.feature_mean) / self.feature_std).astype(np.float32)

    def predict(self, features) -> np.ndarray:
        return repair_lsp(self.predict_raw(features), LSP_MIN_GAP)

    def save(self, path) -> None:
        """Model in the AESSI format plus a ``<path>.json`` sidecar with window and scaling."""
        save_model(self.model, path)
        as_list = lambda v: None if v is None else [float(x) for x in v]  # noqa: E731
        meta = {"window": self.window.width, "edge_policy": self.window.edge_policy,
                "feature_kind": self.feature_kind,
                "target_mean": as_list(self.target_mean), "target_std": as_list(self.target_std),
                "feature_mean": as_list(self.feature_mean),
                "feature_std": as_list(self.feature_std)}
        Path(f"{path}.json").write_text(json.dumps(meta, indent=1) + "\n")

    @classmethod
    def load(cls, path) -> Estimator:
        meta = json.loads(Path(f"{path}.json").read_text())
        as_array = lambda v: None if v is None else np.array(v, dtype=np.float32)  # noqa: E731
        return cls(load_model(path), WindowSpec(meta["window"], meta["edge_policy"]),
                   np.array(meta["target_mean"]), np.array(meta["target_std"]),
                   meta.get("feature_kind", "ae"), as_array(meta.get("feature_mean")),
                   as_array(meta.get("feature_std")))


def predict(estimator: Estimator, features, spec: WindowSpec | None = None) -> np.ndarray:
    if spec is not None and spec != estimator.window:
        raise ValueError(f"estimator was trained with {estimator.window}, not {spec}")
    return estimator.predict(features)


def _check_dims(utterances: Sequence[ParallelUtterance]) -> int:
    if not utterances:
        raise ValueError("no utterances")
    dims = {np.shape(u.features)[1] for u in utterances}
    if len(dims) != 1:
        raise ValueError(f"inconsistent feature dimensions across utterances: {sorted(dims)}")
    return dims.pop()


def feature_stats(utterances: Sequence[ParallelUtterance]) -> tuple[np.ndarray, np.ndarray]:
    """Per-dimension mean and std over all frames; constant dimensions get std 1."""
    _check_dims(utterances)
    f = np.concatenate([np.asarray(u.features, dtype=np.float64) for u in utterances])
    std = f.std(axis=0)
    std[std == 0] = 1.0
    return f.mean(axis=0).astype(np.float32), std.astype(np.float32)


def _pool(utterances: Sequence[ParallelUtterance], spec: WindowSpec, scale):
    _check_dims(utterances)
    x = np.concatenate([assemble_windows(scale(u.features), spec) for u in utterances])
    y = np.concatenate([np.asarray(u.targets, dtype=np.float64) for u in utterances])
    return x, y


@dataclass
class EstimatorTraining:
    estimator: Estimator
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0


def train_estimator(train_utts: Sequence[ParallelUtterance], dev_utts: Sequence[ParallelUtterance],
                    spec: WindowSpec, cfg: TrainConfig, hidden: int = HIDDEN, depth: int = DEPTH,
                    feature_kind: str = "ae", on_epoch=None) -> EstimatorTraining:
    """Train on per-frame windows pooled over utterances; keep the best-dev snapshot.

    Each history entry holds the epoch's train/dev loss (standardised MSE)
    and the dev NMSE of the de-standardised predictions.
    """
    if not dev_utts:
        raise ValueError("empty development set")
    if _check_dims(train_utts) != _check_dims(dev_utts):
        raise ValueError("train and dev feature dimensions differ")
    f_mean, f_std = feature_stats(train_utts)

    def scale(f):
        return ((np.asarray(f, dtype=np.float32) - f_mean) / f_std).astype(np.float32)

    x, y = _pool(train_utts, spec, scale)
    xd, yd = _pool(dev_utts, spec, scale)
    if xd.shape[1] != x.shape[1]:
        raise ValueError("train and dev feature dimensions differ")
    mean = y.mean(axis=0)
    std = y.std(axis=0)
    std[std == 0] = 1.0
    ys = ((y - mean) / std).astype(np.float32)
    yds = ((yd - mean) / std).astype(np.float32)
    model = build_estimator(x.shape[1], hidden, depth, y.shape[1], seed=cfg.seed)
    dev_var = yd.var(axis=0)
    history: list[dict] = []

    def record(rec: EpochRecord, current: MlpModel):
        entry = rec.as_dict()
        if np.all(dev_var > 0):
            out = np.concatenate([forward(current, xd[i:i + 1024]) for i in range(0, len(xd), 1024)])
            entry["dev_nmse"] = nmse(out.astype(np.float64) * std + mean, yd)[0]
        history.append(entry)
        if on_epoch is not None:
            on_epoch(entry)

    result = train(model, x, ys, cfg, (xd, yds), record)
    est = Estimator(result.model, spec, mean, std, feature_kind, f_mean, f_std)
    return EstimatorTraining(est, history, result.best_epoch)
