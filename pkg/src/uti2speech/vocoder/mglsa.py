"""Time-varying MGLSA synthesis filter for ``gamma = -1/stage``.

For integer ``stage`` the filter ``(1 + gamma F(z))^(1/gamma)`` is exactly
``stage`` cascaded all-pole sections ``1 / (1 + gamma F(z))``, where
``F(z) = sum_{m>=1} b(m) Phi_m(z)`` is built on the mel all-pass chain. Every
``Phi_m`` carries a unit delay, so each section is computable sample by
sample without a delay-free loop.
"""

from __future__ import annotations

import numpy as np
from numba import njit

from .config import VocoderConfig
from .excitation import frame_boundaries, make_excitation
from .mgc import frame_filter_coefficients


@njit(cache=True)
def _run_cascade(x, gains, coefs, alpha, gamma, chain, yprev):
    n = x.shape[0]
    stages, order = chain.shape
    out = np.empty(n)
    tmp = np.empty(order)
    aa = 1.0 - alpha * alpha
    for i in range(n):
        v = x[i] * gains[i]
        for s in range(stages):
            tmp[0] = alpha * chain[s, 0] + aa * yprev[s]
            for k in range(1, order):
                tmp[k] = chain[s, k - 1] - alpha * tmp[k - 1] + alpha * chain[s, k]
            acc = 0.0
            for k in range(order):
                acc += coefs[i, k + 1] * tmp[k]
                chain[s, k] = tmp[k]
            v = v - gamma * acc
            yprev[s] = v
        out[i] = v
    return out


class MglsaFilter:
    """Stateful synthesis filter; use one instance per utterance."""

    def __init__(self, cfg: VocoderConfig):
        self.cfg = cfg
        self.stage = cfg.stage
        self.reset()

    def reset(self) -> None:
        self._chain = np.zeros((self.stage, self.cfg.order))
        self._yprev = np.zeros(self.stage)

    def process(self, x, gains, coefs) -> np.ndarray:
        """Filter ``x`` with per-sample ``gains`` (n,) and normalised ``coefs`` (n, M+1)."""
        x = np.ascontiguousarray(x, dtype=np.float64)
        gains = np.ascontiguousarray(np.broadcast_to(gains, x.shape), dtype=np.float64)
        coefs = np.ascontiguousarray(np.broadcast_to(coefs, (len(x), self.cfg.order + 1)),
                                     dtype=np.float64)
        if not (np.all(np.isfinite(gains)) and np.all(np.isfinite(coefs))):
            raise ValueError("non-finite filter coefficients")
        return _run_cascade(x, gains, coefs, float(self.cfg.alpha), float(self.cfg.gamma),
                            self._chain, self._yprev)


def interpolate_frames(values, bounds) -> np.ndarray:
    """Expand per-frame rows to per-sample rows with linear interpolation between frame starts.

    Sample ``n`` in frame ``k`` takes ``(1 - f) v[k] + f v[k+1]`` with
    ``f = (n - start_k) / len_k``; the last frame is held constant.
    """
    values = np.asarray(values, dtype=np.float64)
    n_frames = len(values)
    lengths = np.diff(bounds)
    frame_of = np.repeat(np.arange(n_frames), lengths)
    frac = (np.arange(bounds[-1]) - bounds[frame_of]) / np.maximum(lengths[frame_of], 1)
    nxt = np.minimum(frame_of + 1, n_frames - 1)
    if values.ndim == 1:
        return (1.0 - frac) * values[frame_of] + frac * values[nxt]
    return (1.0 - frac)[:, None] * values[frame_of] + frac[:, None] * values[nxt]


def mglsa_synthesize(params, f0, cfg: VocoderConfig = VocoderConfig(), seed: int = 0,
                     excitation=None) -> np.ndarray:
    """Render a waveform from ``(n, 1 + M)`` MGC-LSP frames and an F0 track.

    ``excitation`` overrides the impulse/noise source (its length must equal
    the frame-boundary total).
    """
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    f0 = np.asarray(f0, dtype=np.float64).reshape(-1)
    if len(params) != len(f0):
        raise ValueError(f"{len(params)} parameter frames but {len(f0)} F0 values")
    bounds = frame_boundaries(len(params), cfg)
    if excitation is None:
        excitation = make_excitation(f0, cfg, seed)
    elif len(excitation) != bounds[-1]:
        raise ValueError(f"excitation has {len(excitation)} samples, expected {bounds[-1]}")
    if len(params) == 0:
        return np.zeros(0)
    gains, coefs = frame_filter_coefficients(params, cfg)
    filt = MglsaFilter(cfg)
    return filt.process(excitation, interpolate_frames(gains, bounds),
                        interpolate_frames(coefs, bounds))
