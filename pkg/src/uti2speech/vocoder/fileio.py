"""SPTK-style headerless float files and 16-bit PCM WAV."""

from __future__ import annotations

import logging
import wave
from pathlib import Path

import numpy as np

log = logging.getLogger(__name__)


def write_floats(path, data) -> None:
    """Little-endian float32, frame-major."""
    Path(path).write_bytes(np.ascontiguousarray(data, dtype="<f4").tobytes())


def read_floats(path, dim: int = 1) -> np.ndarray:
    data = Path(path).read_bytes()
    if len(data) % (4 * dim):
        raise ValueError(f"{path}: size {len(data)} is not a multiple of {4 * dim} bytes")
    arr = np.frombuffer(data, dtype="<f4").astype(np.float64)
    return arr.reshape(-1, dim) if dim > 1 else arr


def write_params(path, params) -> None:
    """``(n, 25)`` MGC-LSP frames: gain first, then 24 LSP frequencies in radians."""
    params = np.asarray(params)
    if params.ndim != 2:
        raise ValueError("parameter array must be 2-D (frames, dim)")
    write_floats(path, params)


def read_params(path, dim: int = 25) -> np.ndarray:
    return read_floats(path, dim)


def write_f0(path, f0) -> None:
    write_floats(path, np.asarray(f0).reshape(-1))


def read_f0(path) -> np.ndarray:
    return read_floats(path, 1)


def write_wav(path, samples, sample_rate: int = 22050, normalize: bool = False,
              peak: float = 0.9) -> int:
    """Write mono 16-bit PCM; returns the number of clipped samples.

    With ``normalize`` the signal is scaled so its absolute peak equals
    ``peak``. A warning is logged when more than 1% of samples clip.
    """
    x = np.asarray(samples, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(x)):
        raise ValueError("refusing to write non-finite samples")
    if normalize and x.size:
        top = np.max(np.abs(x))
        if top > 0:
            x = x * (peak / top)
    q = np.round(x * 32768.0)
    clipped = int(np.count_nonzero((q > 32767) | (q < -32768)))
    if x.size and clipped > 0.01 * x.size:
        log.warning("%s: %d of %d samples clipped", path, clipped, x.size)
    pcm = np.clip(q, -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as w:
        w.setnchannels(1)
        w.setsampwidth(2)
        w.setframerate(int(sample_rate))
        w.writeframes(pcm.tobytes())
    return clipped


def read_wav(path) -> tuple[np.ndarray, int]:
    """Samples scaled to [-1, 1) and the sample rate."""
    with wave.open(str(path), "rb") as w:
        if w.getsampwidth() != 2 or w.getnchannels() != 1:
            raise ValueError(f"{path}: only mono 16-bit PCM is supported")
        rate = w.getframerate()
        raw = w.readframes(w.getnframes())
    return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0, rate
