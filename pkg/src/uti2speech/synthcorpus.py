"""Deterministic synthetic parallel corpus.

Each utterance is driven by a smooth latent "articulator" trajectory. The
latents shape a bright tongue-like contour in every raw ultrasound frame
and, through a fixed mixing map over a +-``context_radius`` frame
neighbourhood, the frame's 25-dim MGC-LSP target. Because the target of
frame t depends on neighbouring latents, wider input windows carry
information a single frame cannot.

Everything is a pure function of the config (seed included): per-utterance
generators are derived with ``SeedSequence(seed, spawn_key=(split, index))``.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import uspre
from .vocoder import write_f0, write_params
from .vocoder.lsp import check_lsp, repair_lsp

log = logging.getLogger(__name__)

SPLITS = ("train", "dev", "test")
LSP_ORDER = 24
BACKGROUND = 30.0
CONTOUR_PEAK = 200.0
TARGET_MARGIN = 0.01
_MIX_KEY = 0x6D6978
TARGET_MAPS = ("tanh", "linear")


@dataclass(frozen=True)
class CorpusConfig:
    latent_dim: int = 8
    n_train: int = 31
    n_dev: int = 4
    n_test: int = 9
    frames_per_utterance: int = 120
    speckle_noise_sigma: float = 0.15
    context_radius: int = 2
    seed: int = 0
    fps: float = 82.0
    walk_rho: float = 0.6
    walk_sigma: float = 0.4
    smoothing_window: int = 3
    contour_width: float = 40.0
    gain_base: float = -1.0
    gain_slope: float = 2.0
    target_map: str = "tanh"

    def __post_init__(self):
        if self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if min(self.n_train, self.n_dev, self.n_test, self.frames_per_utterance) < 1:
            raise ValueError("utterance and frame counts must be >= 1")
        if self.speckle_noise_sigma < 0 or self.walk_sigma < 0:
            raise ValueError("noise levels must be >= 0")
        if self.context_radius < 0 or self.smoothing_window < 1:
            raise ValueError("context_radius must be >= 0 and smoothing_window >= 1")
        if not 0 <= self.walk_rho <= 1:
            raise ValueError("walk_rho must lie in [0, 1]")
        if self.target_map not in TARGET_MAPS:
            raise ValueError(f"target_map must be one of {TARGET_MAPS}, got {self.target_map!r}")

    def counts(self) -> dict[str, int]:
        return {"train": self.n_train, "dev": self.n_dev, "test": self.n_test}

    @property
    def max_delta(self) -> float:
        """Bound on the adjacent-frame change of every latent coordinate."""
        return 2.0 / self.smoothing_window

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def utterance_rng(cfg: CorpusConfig, split: str, index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(cfg.seed, spawn_key=(SPLITS.index(split), index))
    return np.random.default_rng(ss)


def sample_trajectory(cfg: CorpusConfig, rng: np.random.Generator, n_frames: int | None = None) -> np.ndarray:
    """Clipped AR(1) Gaussian walk, moving-averaged over ``smoothing_window`` frames.

    Output is ``(n_frames, latent_dim)`` in [-1, 1] and adjacent frames differ
    by at most ``cfg.max_delta``.
    """
    n = cfg.frames_per_utterance if n_frames is None else n_frames
    win = cfg.smoothing_window
    burn = 20
    steps = rng.standard_normal((burn + n + win - 1, cfg.latent_dim))
    walk = np.empty_like(steps)
    x = np.zeros(cfg.latent_dim)
    for t, e in enumerate(steps):
        x = np.clip(cfg.walk_rho * x + cfg.walk_sigma * e, -1.0, 1.0)
        walk[t] = x
    walk = walk[burn:]
    kernel = np.ones(win) / win
    smooth = np.stack([np.convolve(walk[:, j], kernel, mode="valid") for j in range(cfg.latent_dim)],
                      axis=1)
    return np.clip(smooth, -1.0, 1.0)


def contour_depth(latents, cfg: CorpusConfig) -> np.ndarray:
    """Depth (in raw samples) of the contour on each of the 64 beams."""
    latents = np.asarray(latents, dtype=np.float64)
    u = np.linspace(-1.0, 1.0, uspre.N_BEAMS)
    depth = 560.0 - 240.0 * (1.0 - u * u)
    shapes = [np.ones_like(u), u, u * u - 1.0 / 3.0]
    amps = [60.0, 60.0, 90.0]
    for k, lat in enumerate(latents):
        if k < 3:
            depth = depth + amps[k] * lat * shapes[k]
        else:
            harmonic = k - 1
            depth = depth + 25.0 * lat * np.sin(harmonic * np.pi * (u + 1.0) / 2.0)
    return depth


def render_frame(latents, cfg: CorpusConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """One raw ``(64, 946)`` uint8 frame with a Gaussian-profile bright contour and speckle."""
    depth = contour_depth(latents, cfg)
    s = np.arange(uspre.N_SAMPLES)[None, :]
    profile = np.exp(-0.5 * ((s - depth[:, None]) / cfg.contour_width) ** 2)
    img = BACKGROUND + (CONTOUR_PEAK - BACKGROUND) * profile
    sigma = cfg.speckle_noise_sigma
    if sigma > 0:
        if rng is None:
            raise ValueError("speckle noise needs a random generator")
        shape = 1.0 / (sigma * sigma)
        img = img * rng.gamma(shape, 1.0 / shape, size=img.shape)
    return np.clip(np.rint(img), 0, 255).astype(np.uint8)


def mixing_matrix(cfg: CorpusConfig) -> np.ndarray:
    """Fixed ``(24, (2r+1) * d)`` map from a latent window to LSP perturbations."""
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(_MIX_KEY,)))
    n_in = (2 * cfg.context_radius + 1) * cfg.latent_dim
    return rng.standard_normal((LSP_ORDER, n_in)) / np.sqrt(n_in) * 2.0


def base_lsp() -> np.ndarray:
    return np.arange(1, LSP_ORDER + 1) * np.pi / (LSP_ORDER + 1)


def latents_to_target(window, cfg: CorpusConfig, mixing: np.ndarray | None = None) -> np.ndarray:
    """Target ``[gain, lsp...]`` for a ``(2r+1, d)`` latent window centred on the frame.

    With ``target_map="tanh"`` the LSP perturbations are
    ``0.4 * pi/25 * tanh(mixing @ window)`` and the gain is quadratic in the
    window. With ``"linear"`` every row of the mixing map is divided by its
    L1 norm (so the perturbation still stays within ``0.4 * pi/25`` for latents
    in [-1, 1]) and the gain is linear too. Either way consecutive LSPs stay at
    least ``0.2 * pi/25`` apart; the repair step is a safeguard.
    """
    window = np.asarray(window, dtype=np.float64)
    span = 2 * cfg.context_radius + 1
    if window.shape != (span, cfg.latent_dim):
        raise ValueError(f"latent window must be {(span, cfg.latent_dim)}, got {window.shape}")
    mixing = mixing_matrix(cfg) if mixing is None else mixing
    v = window.reshape(-1)
    spacing = np.pi / (LSP_ORDER + 1)
    if cfg.target_map == "linear":
        shift = (mixing @ v) / np.abs(mixing).sum(axis=1)
        gain = cfg.gain_base + cfg.gain_slope * float(np.mean(v))
    else:
        shift = np.tanh(mixing @ v)
        gain = cfg.gain_base + cfg.gain_slope * float(np.mean(v * v))
    lsp = base_lsp() + 0.4 * spacing * shift
    return repair_lsp(np.concatenate([[gain], lsp]), TARGET_MARGIN * 1.0001)


def trajectory_targets(latents, cfg: CorpusConfig, mixing: np.ndarray | None = None) -> np.ndarray:
    """Targets for every frame, replicating the first/last latent at the edges."""
    mixing = mixing_matrix(cfg) if mixing is None else mixing
    r = cfg.context_radius
    padded = np.concatenate([np.repeat(latents[:1], r, 0), latents, np.repeat(latents[-1:], r, 0)])
    return np.stack([latents_to_target(padded[t:t + 2 * r + 1], cfg, mixing)
                     for t in range(len(latents))])


def sample_f0(n_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Alternating unvoiced (0) and voiced stretches with a 120-180 Hz sinusoidal contour."""
    f0 = np.zeros(n_frames)
    t = int(rng.integers(3, 10))
    while t < n_frames:
        length = int(rng.integers(15, 41))
        period = rng.uniform(20.0, 60.0)
        phase = rng.uniform(0.0, 2 * np.pi)
        k = np.arange(min(length, n_frames - t))
        f0[t:t + len(k)] = 150.0 + 30.0 * np.sin(2 * np.pi * k / period + phase)
        t += length + int(rng.integers(4, 13))
    return f0


@dataclass
class SyntheticUtterance:
    latents: np.ndarray   # (T, d)
    raw: np.ndarray       # (T, 64, 946) uint8
    targets: np.ndarray   # (T, 25)
    f0: np.ndarray        # (T,)


def generate_utterance(cfg: CorpusConfig, split: str, index: int,
                       mixing: np.ndarray | None = None) -> SyntheticUtterance:
    rng = utterance_rng(cfg, split, index)
    latents = sample_trajectory(cfg, rng)
    raw = np.stack([render_frame(lat, cfg, rng) for lat in latents])
    targets = trajectory_targets(latents, cfg, mixing)
    f0 = sample_f0(len(latents), rng)
    return SyntheticUtterance(latents, raw, targets, f0)


def utterance_name(index: int) -> str:
    return f"utt{index:03d}"


def generate_corpus(cfg: CorpusConfig, out_dir) -> dict:
    """Write ``train/ dev/ test/`` with ``uttNNN.{ult,meta,param,f0}`` plus a ``manifest``."""
    out = Path(out_dir)
    mixing = mixing_matrix(cfg)
    manifest = {"seed": cfg.seed, "config_hash": cfg.config_hash(),
                "config": json.dumps(asdict(cfg), sort_keys=True)}
    for split, count in cfg.counts().items():
        d = out / split
        d.mkdir(parents=True, exist_ok=True)
        names = []
        for i in range(count):
            utt = generate_utterance(cfg, split, i, mixing)
            for frame in utt.targets:
                check_lsp(frame[1:], TARGET_MARGIN)
            name = utterance_name(i)
            uspre.save_ult(d / f"{name}.ult", utt.raw, cfg.fps)
            write_params(d / f"{name}.param", utt.targets)
            write_f0(d / f"{name}.f0", utt.f0)
            names.append(name)
        manifest[split] = ",".join(names)
        log.info("wrote %d %s utterances", count, split)
    (out / "manifest").write_text("".join(f"{k}={v}\n" for k, v in manifest.items()))
    return manifest
