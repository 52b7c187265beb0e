"""Reading corpus splits and per-utterance feature files from disk."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import uspre
from .uspre import read_meta, write_meta
from .vocoder import read_f0, read_params


@dataclass
class Utterance:
    name: str
    targets: np.ndarray          # (T, 25)
    f0: np.ndarray               # (T,)
    frames: np.ndarray | None = None   # (T, 64, 128) in [0, 1]
    fps: float = uspre.DEFAULT_FPS

    def pixels(self) -> np.ndarray:
        if self.frames is None:
            raise ValueError(f"{self.name}: frames were not loaded")
        return self.frames.reshape(len(self.frames), -1)


def split_names(corpus_dir, split: str) -> list[str]:
    d = Path(corpus_dir) / split
    if not d.is_dir():
        raise FileNotFoundError(f"missing split directory {d}")
    return sorted(p.stem for p in d.glob("*.param"))


def load_utterance(corpus_dir, split: str, name: str, with_frames: bool = True,
                   dim: int = 25) -> Utterance:
    d = Path(corpus_dir) / split
    targets = read_params(d / f"{name}.param", dim)
    f0 = read_f0(d / f"{name}.f0")
    if len(f0) != len(targets):
        raise ValueError(f"{name}: {len(targets)} parameter frames but {len(f0)} F0 values")
    frames, fps = None, uspre.DEFAULT_FPS
    if with_frames:
        seq = uspre.load_sequence(d / f"{name}.ult")
        if len(seq) != len(targets):
            raise ValueError(f"{name}: {len(seq)} ultrasound frames but {len(targets)} targets")
        frames, fps = seq.frames.astype(np.float32), seq.fps
    return Utterance(name, targets, f0, frames, fps)


def load_split(corpus_dir, split: str, with_frames: bool = True) -> list[Utterance]:
    names = split_names(corpus_dir, split)
    if not names:
        raise ValueError(f"split {split!r} in {corpus_dir} is empty")
    return [load_utterance(corpus_dir, split, n, with_frames) for n in names]


def write_features(path, features) -> None:
    """Encoded features as little-endian float32 plus a ``<path>.meta`` sidecar (frames, N)."""
    features = np.asarray(features)
    if features.ndim != 2:
        raise ValueError("features must be (frames, N)")
    path = Path(path)
    path.write_bytes(np.ascontiguousarray(features, dtype="<f4").tobytes())
    write_meta(Path(f"{path}.meta"), {"frames": features.shape[0], "N": features.shape[1]})


def read_features(path) -> np.ndarray:
    path = Path(path)
    meta_path = Path(f"{path}.meta")
    if not meta_path.exists():
        raise FileNotFoundError(f"missing feature sidecar {meta_path}")
    meta = read_meta(meta_path)
    n, dim = int(meta["frames"]), int(meta["N"])
    data = path.read_bytes()
    if len(data) != 4 * n * dim:
        raise ValueError(f"{path}: {len(data)} bytes, sidecar implies {4 * n * dim}")
    return np.frombuffer(data, dtype="<f4").reshape(n, dim).astype(np.float32)
