"""Impulse/noise excitation driven by a per-frame F0 track."""

from __future__ import annotations

from fractions import Fraction

import numpy as np

from .config import VocoderConfig


def frame_boundaries(n_frames: int, cfg: VocoderConfig) -> np.ndarray:
    """Start sample of every frame plus the end of the last one (``n_frames + 1`` values).

    Boundaries are ``floor(k * fs / fps)`` computed in exact rational
    arithmetic, so the fractional frame shift never drifts.
    """
    shift = Fraction(cfg.sample_rate) / Fraction(cfg.fps)
    return np.array([int(k * shift) for k in range(n_frames + 1)], dtype=np.int64)


def check_f0(f0, cfg: VocoderConfig) -> np.ndarray:
    f0 = np.asarray(f0, dtype=np.float64).reshape(-1)
    if not np.all(np.isfinite(f0)):
        raise ValueError("F0 track contains non-finite values")
    if np.any(f0 < 0):
        raise ValueError("F0 values must be >= 0 (0 marks unvoiced frames)")
    if np.any(f0 >= cfg.sample_rate / 2):
        raise ValueError(f"F0 must stay below fs/2 = {cfg.sample_rate / 2} Hz")
    return f0


def make_excitation(f0, cfg: VocoderConfig, seed: int = 0) -> np.ndarray:
    """Unit impulses every ``fs / f0`` samples in voiced frames, unit-variance noise elsewhere.

    The pitch phase carries over frame boundaries; an impulse is emitted at
    the first sample of every voiced stretch.
    """
    f0 = check_f0(f0, cfg)
    bounds = frame_boundaries(len(f0), cfg)
    n = int(bounds[-1])
    out = np.zeros(n)
    per_sample = np.repeat(f0, np.diff(bounds))
    voiced = per_sample > 0
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n)
    out[~voiced] = noise[~voiced]
    phase = 1.0
    inc = per_sample / cfg.sample_rate
    for i in np.flatnonzero(voiced):
        if i == 0 or not voiced[i - 1]:
            phase = 1.0
        if phase >= 1.0:
            out[i] = 1.0
            phase -= 1.0
        phase += inc[i]
    return out
