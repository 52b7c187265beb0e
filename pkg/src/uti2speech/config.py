"""Pipeline configuration loaded from a JSON file.

A config file holds any subset of the sections below; missing keys keep the
defaults. The top-level ``seed`` drives the corpus, both training runs and
the excitation noise, so one number reproduces a whole experiment.

    {
      "seed": 1,
      "corpus": {"n_train": 31, "frames_per_utterance": 120},
      "autoencoder": {"bottleneck": 64, "train": {"learning_rate": 0.001}},
      "estimator": {"window": 9, "features": "ae", "train": {"max_epochs": 25}},
      "vocoder": {"alpha": 0.42},
      "sweep": {"bottlenecks": [64], "windows": [1, 9], "pixel_windows": [1]},
      "paths": {"workdir": "work"}
    }
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

from .autoenc import AutoencoderConfig
from .estimator import WindowSpec
from .nncore import TrainConfig
from .synthcorpus import CorpusConfig
from .vocoder import VocoderConfig

FEATURE_KINDS = ("ae", "pixels")


def _ae_train() -> TrainConfig:
    return TrainConfig(learning_rate=5e-4, batch_size=16, max_epochs=40, patience=8)


def _est_train() -> TrainConfig:
    return TrainConfig(learning_rate=3e-4, l2_lambda=1e-4, batch_size=64, max_epochs=15, patience=5)


@dataclass(frozen=True)
class EstimatorSettings:
    window: int = 9
    features: str = "ae"
    hidden: int = 1024
    depth: int = 5
    train: TrainConfig = field(default_factory=_est_train)

    def __post_init__(self):
        WindowSpec(self.window)
        if self.features not in FEATURE_KINDS:
            raise ValueError(f"features must be one of {FEATURE_KINDS}, got {self.features!r}")
        if self.hidden < 1 or self.depth < 1:
            raise ValueError("hidden and depth must be >= 1")

    @property
    def spec(self) -> WindowSpec:
        return WindowSpec(self.window)


@dataclass(frozen=True)
class SweepSettings:
    bottlenecks: tuple[int, ...] = (64,)
    windows: tuple[int, ...] = (1, 9)
    pixel_windows: tuple[int, ...] = (1,)
    eval_split: str = "dev"

    def __post_init__(self):
        for w in self.windows + self.pixel_windows:
            WindowSpec(w)
        if self.eval_split not in ("dev", "test"):
            raise ValueError("sweep eval_split must be 'dev' or 'test'")


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 1
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    autoencoder: AutoencoderConfig = field(
        default_factory=lambda: AutoencoderConfig(bottleneck=64, train=_ae_train()))
    estimator: EstimatorSettings = field(default_factory=EstimatorSettings)
    vocoder: VocoderConfig = field(default_factory=VocoderConfig)
    sweep: SweepSettings = field(default_factory=SweepSettings)
    workdir: str = "work"

    def __post_init__(self):
        if not 0 <= self.seed < 2**32:
            raise ValueError("seed must lie in [0, 2**32)")

    def with_seed(self, seed: int) -> PipelineConfig:
        """Copy with ``seed`` pushed into the corpus and both training configs."""
        ae = replace(self.autoencoder, train=replace(self.autoencoder.train, seed=seed))
        est = replace(self.estimator, train=replace(self.estimator.train, seed=seed))
        return replace(self, seed=seed, corpus=replace(self.corpus, seed=seed),
                       autoencoder=ae, estimator=est)

    def to_dict(self) -> dict:
        d = asdict(self)
        workdir = d.pop("workdir")
        d["paths"] = {"workdir": workdir}
        return d


def _overlay(default, data, section: str) -> dict:
    """``data`` on top of the default section's values, nested objects included."""
    if not isinstance(data, dict):
        raise ValueError(f"config section {section!r} must be an object")
    merged = asdict(default)
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            value = {**merged[key], **value}
        merged[key] = value
    return merged


def _build(cls, data, section: str, nested: dict | None = None):
    if not isinstance(data, dict):
        raise ValueError(f"config section {section!r} must be an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(data) - known)
    if unknown:
        raise ValueError(f"unknown key(s) in {section!r}: {', '.join(unknown)}")
    kw = dict(data)
    for key, sub in (nested or {}).items():
        if key in kw:
            kw[key] = _build(sub, kw[key], f"{section}.{key}")
    for f in fields(cls):
        if f.name in kw and isinstance(kw[f.name], list):
            kw[f.name] = tuple(kw[f.name])
    return cls(**kw)


SECTIONS = {
    "corpus": (CorpusConfig, None),
    "autoencoder": (AutoencoderConfig, {"train": TrainConfig}),
    "estimator": (EstimatorSettings, {"train": TrainConfig}),
    "vocoder": (VocoderConfig, None),
    "sweep": (SweepSettings, None),
}


def config_from_dict(data: dict) -> PipelineConfig:
    """Build a config; every key not given keeps its value from ``PipelineConfig()``."""
    data = dict(data)
    unknown = sorted(set(data) - set(SECTIONS) - {"seed", "paths"})
    if unknown:
        raise ValueError(f"unknown config section(s): {', '.join(unknown)}")
    default = PipelineConfig()
    kw = {}
    for name, (cls, nested) in SECTIONS.items():
        if name in data:
            kw[name] = _build(cls, _overlay(getattr(default, name), data[name], name), name, nested)
    if "paths" in data:
        paths = data["paths"]
        if not isinstance(paths, dict) or set(paths) - {"workdir"}:
            raise ValueError("the 'paths' section only accepts 'workdir'")
        kw["workdir"] = str(paths.get("workdir", default.workdir))
    cfg = replace(default, **kw)
    return cfg.with_seed(int(data.get("seed", default.seed)))


def load_config(path=None) -> PipelineConfig:
    """Read a JSON config; ``None`` gives the defaults."""
    if path is None:
        return PipelineConfig().with_seed(PipelineConfig.seed)
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"config file {p} not found")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ValueError(f"{p}: invalid JSON ({exc.msg} at line {exc.lineno})") from None
    return config_from_dict(data)
