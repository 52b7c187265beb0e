"""Line spectral pair <-> polynomial conversion.

An order-M polynomial ``A(z) = 1 + a1 z^-1 + ... + aM z^-M`` is split into
the symmetric and antisymmetric polynomials

    P(z) = A(z) + z^-(M+1) A(1/z),    Q(z) = A(z) - z^-(M+1) A(1/z)

whose unit-circle roots interlace when A is minimum phase. The LSP
frequencies are those root angles in (0, pi), in increasing order; the
first one always belongs to P.

A parameter vector is ``[gain, w1, ..., wM]`` and a coefficient vector is
``[gain, a1, ..., aM]``: position 0 is carried through untouched.
"""

from __future__ import annotations

import numpy as np
from numba import njit
from numpy.polynomial import chebyshev

GRID_POINTS = 8192
BISECT_TOL = 1e-13


class InstabilityError(ValueError):
    """Coefficients do not correspond to a minimum-phase polynomial."""


def check_lsp(lsp, min_gap: float = 0.0) -> None:
    lsp = np.asarray(lsp, dtype=np.float64)
    if lsp.ndim != 1 or len(lsp) == 0:
        raise ValueError("LSP vector must be a non-empty 1-D array")
    if not np.all(np.isfinite(lsp)):
        raise ValueError("LSP vector contains non-finite values")
    if lsp[0] <= 0 or lsp[-1] >= np.pi:
        raise ValueError(f"LSP frequencies must lie in (0, pi), got [{lsp[0]}, {lsp[-1]}]")
    gaps = np.diff(lsp)
    if np.any(gaps <= min_gap):
        k = int(np.argmin(gaps))
        raise ValueError(f"LSP frequencies not strictly increasing at index {k}: "
                         f"{lsp[k]} -> {lsp[k + 1]}")


# The expansion cancels heavily: P and Q have coefficients up to ~1e6 while
# A = (P + Q) / 2 is O(1), so plain double arithmetic loses about eight
# digits. Products and sums below are carried as unevaluated double-double
# pairs (hi, lo) built from error-free transformations, then rounded once.

@njit(cache=True)
def _two_sum(a, b):
    s = a + b
    bb = s - a
    return s, (a - (s - bb)) + (b - bb)


@njit(cache=True)
def _split(a):
    t = 134217729.0 * a  # 2**27 + 1
    hi = t - (t - a)
    return hi, a - hi


@njit(cache=True)
def _two_prod(a, b):
    p = a * b
    ah, al = _split(a)
    bh, bl = _split(b)
    return p, ((ah * bh - p) + ah * bl + al * bh) + al * bl


@njit(cache=True)
def _dd_add(ah, al, bh, bl):
    s, e = _two_sum(ah, bh)
    e += al + bl
    return _two_sum(s, e)


@njit(cache=True)
def _dd_quad_product(cosines, hi, lo):
    """``prod_k (1 - 2 c_k z^-1 + z^-2)`` into ``hi``/``lo`` (ascending, zero-filled)."""
    hi[0] = 1.0
    n = 1
    for c in cosines:
        m = -2.0 * c
        for k in range(n + 1, -1, -1):
            sh, sl = (hi[k], lo[k]) if k < n else (0.0, 0.0)
            if 1 <= k <= n:
                ph, pl = _two_prod(hi[k - 1], m)
                sh, sl = _dd_add(sh, sl, ph, pl + lo[k - 1] * m)
            if k >= 2:
                sh, sl = _dd_add(sh, sl, hi[k - 2], lo[k - 2])
            hi[k] = sh
            lo[k] = sl
        n += 2


@njit(cache=True)
def _dd_lsp_poly(cos_p, cos_q, m):
    """Coefficients ``a_1..a_M`` of ``(P + Q) / 2`` for LSP cosines split into P and Q."""
    ph = np.zeros(m + 2)
    pl = np.zeros(m + 2)
    qh = np.zeros(m + 2)
    ql = np.zeros(m + 2)
    _dd_quad_product(cos_p, ph, pl)
    _dd_quad_product(cos_q, qh, ql)
    # trivial roots: P (1 + z^-1), Q (1 - z^-1) for even M; Q (1 - z^-2) for odd M
    step_p, step_q = (1, 1) if m % 2 == 0 else (0, 2)
    for k in range(m + 1, 0, -1):
        if step_p and k >= step_p:
            ph[k], pl[k] = _dd_add(ph[k], pl[k], ph[k - step_p], pl[k - step_p])
        if k >= step_q:
            qh[k], ql[k] = _dd_add(qh[k], ql[k], -qh[k - step_q], -ql[k - step_q])
    out = np.empty(m)
    for k in range(1, m + 1):
        h, lo_ = _dd_add(ph[k], pl[k], qh[k], ql[k])
        out[k - 1] = 0.5 * (h + lo_)
    return out


def lsp_to_coeff(v) -> np.ndarray:
    """``[gain, lsp...]`` -> ``[gain, a1..aM]``."""
    v = np.asarray(v, dtype=np.float64)
    lsp = v[1:]
    check_lsp(lsp)
    c = np.cos(lsp)
    return np.concatenate([[v[0]], _dd_lsp_poly(c[0::2].copy(), c[1::2].copy(), len(lsp))])


def _deflate(poly, divisor_sign: float, step: int) -> np.ndarray:
    """Divide ascending-coefficient ``poly`` by ``1 + divisor_sign * z^-step``."""
    out = np.zeros(len(poly) - step)
    for k in range(len(out)):
        out[k] = poly[k] - (divisor_sign * out[k - step] if k >= step else 0.0)
    return out


def _cheb_series(sym) -> np.ndarray:
    """Chebyshev series in x = cos(w) of ``e^{jKw} S(e^{jw})`` for symmetric S of degree 2K."""
    k = (len(sym) - 1) // 2
    c = np.empty(k + 1)
    c[0] = sym[k]
    c[1:] = 2.0 * sym[k - 1::-1] if k > 0 else []
    return c


def _cheb_roots(series, grid) -> np.ndarray:
    """Angles in (0, pi) where the Chebyshev series changes sign, refined by bisection."""
    f = chebyshev.chebval(np.cos(grid), series)
    exact = np.nonzero(f[1:-1] == 0.0)[0] + 1
    idx = np.nonzero(f[:-1] * f[1:] < 0)[0]
    lo, hi = grid[idx].copy(), grid[idx + 1].copy()
    flo = f[idx]
    while lo.size and np.max(hi - lo) > BISECT_TOL:
        mid = 0.5 * (lo + hi)
        fm = chebyshev.chebval(np.cos(mid), series)
        left = np.sign(fm) == np.sign(flo)
        lo = np.where(left, mid, lo)
        flo = np.where(left, fm, flo)
        hi = np.where(left, hi, mid)
    return np.sort(np.concatenate([0.5 * (lo + hi), grid[exact]]))


def coeff_to_lsp(coeffs, grid_points: int = GRID_POINTS) -> np.ndarray:
    """``[gain, a1..aM]`` -> ``[gain, lsp...]``, frequencies bracketed on a grid and bisected."""
    coeffs = np.asarray(coeffs, dtype=np.float64)
    m = len(coeffs) - 1
    if m < 1:
        raise ValueError("need at least one predictor coefficient")
    a = np.concatenate([[1.0], coeffs[1:], [0.0]])
    p = a + a[::-1]
    q = a - a[::-1]
    if m % 2 == 0:
        p = _deflate(p, 1.0, 1)
        q = _deflate(q, -1.0, 1)
    else:
        q = _deflate(q, -1.0, 2)
    grid = np.linspace(0.0, np.pi, grid_points + 1)
    wp = _cheb_roots(_cheb_series(p), grid)
    wq = _cheb_roots(_cheb_series(q), grid)
    n_p, n_q = (m + 1) // 2, m // 2
    if len(wp) != n_p or len(wq) != n_q:
        raise InstabilityError(f"found {len(wp)}+{len(wq)} unit-circle roots, expected {n_p}+{n_q}")
    lsp = np.empty(m)
    lsp[0::2] = wp
    lsp[1::2] = wq
    if np.any(np.diff(lsp) <= 0) or lsp[0] <= 0 or lsp[-1] >= np.pi:
        raise InstabilityError("roots of P and Q do not interlace")
    return np.concatenate([[coeffs[0]], lsp])


def repair_lsp(params, min_gap: float = 1e-4) -> np.ndarray:
    """Sort each frame's LSPs and push them apart to at least ``min_gap`` inside (0, pi).

    Works on ``(..., 1 + M)`` arrays; the gain column is left untouched.
    """
    params = np.array(params, dtype=np.float64, copy=True)
    lsp = np.sort(params[..., 1:], axis=-1)
    m = lsp.shape[-1]
    if (m + 1) * min_gap >= np.pi:
        raise ValueError(f"min_gap {min_gap} too large for order {m}")
    lower = min_gap * np.arange(1, m + 1)
    upper = np.pi - min_gap * np.arange(m, 0, -1)
    lsp = np.clip(lsp, lower, upper)
    # forward pass enforces the gap, backward pass keeps the top inside (0, pi)
    for k in range(1, m):
        lsp[..., k] = np.maximum(lsp[..., k], lsp[..., k - 1] + min_gap)
    for k in range(m - 2, -1, -1):
        lsp[..., k] = np.minimum(lsp[..., k], lsp[..., k + 1] - min_gap)
    params[..., 1:] = lsp
    return params


def is_valid_lsp(lsp, min_gap: float = 0.0) -> bool:
    try:
        check_lsp(lsp, min_gap)
    except ValueError:
        return False
    return True
