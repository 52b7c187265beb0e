"""Mel-generalized cepstrum helpers: warped-domain filter coefficients and gain handling.

The MGLSA filter realises

    H(z) = K * (1 + gamma * sum_{m>=1} b'(m) Phi_m(z)) ** (1 / gamma)

where ``Phi_m(z) = (1 - alpha^2) z^-1 / (1 - alpha z^-1) * zt^-(m-1)`` and
``zt^-1 = (z^-1 - alpha) / (1 - alpha z^-1)`` is the first-order all-pass.
With this basis ``sum_m c(m) zt^-m = sum_m b(m) Phi_m(z)`` (plus
``b(0)``), which is what the mc2b recursion computes.
"""

from __future__ import annotations

import numpy as np

from .config import VocoderConfig
from .lsp import lsp_to_coeff


def mc2b(c, alpha: float) -> np.ndarray:
    """Mel-cepstrum -> filter coefficients: ``b(M) = c(M)``, ``b(m) = c(m) - alpha b(m+1)``."""
    b = np.array(c, dtype=np.float64, copy=True)
    for m in range(b.shape[-1] - 2, -1, -1):
        b[..., m] -= alpha * b[..., m + 1]
    return b


def b2mc(b, alpha: float) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    c = b.copy()
    c[..., :-1] += alpha * b[..., 1:]
    return c


def gnorm(b, gamma: float):
    """Gain normalisation; returns ``(K, b_norm)`` with ``b_norm[..., 0] = 0``."""
    b = np.asarray(b, dtype=np.float64)
    b0 = b[..., 0]
    bn = b.copy()
    bn[..., 0] = 0.0
    if gamma == 0:
        return np.exp(b0), bn
    base = 1.0 + gamma * b0
    if np.any(base <= 0):
        raise ValueError(f"unstable gain: 1 + gamma*b(0) = {np.min(base)} <= 0")
    bn[..., 1:] /= base[..., None]
    return base ** (1.0 / gamma), bn


def ignorm(k, bn, gamma: float) -> np.ndarray:
    """Inverse of :func:`gnorm`."""
    k = np.asarray(k, dtype=np.float64)
    b = np.array(bn, dtype=np.float64, copy=True)
    if gamma == 0:
        b[..., 0] = np.log(k)
        return b
    base = k ** gamma
    b[..., 1:] *= base[..., None]
    b[..., 0] = (base - 1.0) / gamma
    return b


def frame_filter_coefficients(params, cfg: VocoderConfig):
    """Per-frame overall gain and normalised filter coefficients.

    ``params`` is ``(n_frames, 1 + M)``: log-gain then LSP frequencies of the
    warped polynomial ``A(zt) = 1 + gamma * sum c'(m) zt^-m``. Returns
    ``gains`` of shape ``(n,)`` (``K * exp(log_gain)``) and ``b`` of shape
    ``(n, M + 1)``, so that each frame's filter is ``exp(log_gain) * A(zt)^(1/gamma)``.
    """
    params = np.atleast_2d(np.asarray(params, dtype=np.float64))
    if params.shape[1] != cfg.dim:
        raise ValueError(f"expected {cfg.dim} parameters per frame, got {params.shape[1]}")
    if not np.all(np.isfinite(params)):
        raise ValueError("non-finite synthesis parameters")
    coeffs = np.stack([lsp_to_coeff(v) for v in params]) if len(params) else np.zeros((0, cfg.dim))
    c = np.zeros_like(coeffs)
    c[:, 1:] = coeffs[:, 1:] / cfg.gamma
    k, bn = gnorm(mc2b(c, cfg.alpha), cfg.gamma)
    return k * np.exp(params[:, 0]), bn


def phi_basis(omega, order: int, alpha: float) -> np.ndarray:
    """``Phi_m(e^{j omega})`` for m = 1..order, shape ``(len(omega), order)``."""
    z1 = np.exp(-1j * np.asarray(omega, dtype=np.float64))
    zt = (z1 - alpha) / (1.0 - alpha * z1)
    first = (1.0 - alpha * alpha) * z1 / (1.0 - alpha * z1)
    return first[:, None] * zt[:, None] ** np.arange(order)[None, :]


def mglsa_response(gain: float, bn, omega, cfg: VocoderConfig) -> np.ndarray:
    """Complex frequency response ``gain * (1 + gamma sum b'(m) Phi_m)^(1/gamma)`` (integer stage)."""
    bn = np.asarray(bn, dtype=np.float64)
    inner = 1.0 + cfg.gamma * (phi_basis(omega, cfg.order, cfg.alpha) @ bn[1:])
    return gain * inner ** (-cfg.stage)
