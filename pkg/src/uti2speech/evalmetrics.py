"""Objective scores for predicted MGC-LSP trajectories.

Both metrics pool all frames of a split (concatenate, then score) and are
computed per parameter dimension before averaging over the dimensions.
NMSE divides each dimension's MSE by the population variance of the target
in that dimension, so predicting the target mean scores exactly 1.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np


class DegenerateTargetError(ValueError):
    """A dimension has zero variance, so a normalised score is undefined."""


def _check_pair(pred, target):
    pred = np.asarray(pred, dtype=np.float64)
    target = np.asarray(target, dtype=np.float64)
    if pred.ndim == 1:
        pred = pred[:, None]
    if target.ndim == 1:
        target = target[:, None]
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs target {target.shape}")
    if len(target) < 2:
        raise ValueError("need at least 2 frames to score")
    return pred, target


def nmse(pred, target, variance=None) -> tuple[float, np.ndarray]:
    """Mean and per-dimension ``MSE_i / Var(target_i)``.

    ``variance`` overrides the normaliser (e.g. training-set variances).
    """
    pred, target = _check_pair(pred, target)
    var = target.var(axis=0) if variance is None else np.asarray(variance, dtype=np.float64)
    if var.shape != (target.shape[1],):
        raise ValueError(f"variance must have shape ({target.shape[1]},)")
    zero = np.flatnonzero((var <= 0) | (np.ptp(target, axis=0) == 0 if variance is None else False))
    if zero.size:
        raise DegenerateTargetError(f"target dimension {int(zero[0])} has zero variance")
    per_dim = np.mean((pred - target) ** 2, axis=0) / var
    return float(per_dim.mean()), per_dim


def _correlation(pred, target, strict: bool) -> np.ndarray:
    dp = pred - pred.mean(axis=0)
    dt = target - target.mean(axis=0)
    sp = np.sum(dp * dp, axis=0)
    st = np.sum(dt * dt, axis=0)
    # exact constancy test; a rounded mean leaves tiny nonzero deviations
    p_const = np.ptp(pred, axis=0) == 0
    sides = (("prediction", p_const), ("target", np.ptp(target, axis=0) == 0))
    for side, const in sides if strict else sides[1:]:
        if const.any():
            raise DegenerateTargetError(f"{side} dimension {int(np.argmax(const))} has zero variance")
    with np.errstate(invalid="ignore", divide="ignore"):
        per_dim = np.sum(dp * dt, axis=0) / np.sqrt(sp * st)
    per_dim[p_const] = np.nan
    return np.clip(per_dim, -1.0, 1.0)


def pearson(pred, target) -> tuple[float, np.ndarray]:
    """Mean and per-dimension Pearson correlation."""
    pred, target = _check_pair(pred, target)
    per_dim = _correlation(pred, target, strict=True)
    return float(per_dim.mean()), per_dim


@dataclass
class EvalReport:
    nmse_mean: float
    nmse_per_dim: list[float]
    corr_mean: float
    corr_per_dim: list[float]
    n_frames: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def to_text(self) -> str:
        lines = [f"n_frames={self.n_frames}",
                 f"nmse_mean={self.nmse_mean:.6f}",
                 f"corr_mean={self.corr_mean:.6f}"]
        for i, (e, r) in enumerate(zip(self.nmse_per_dim, self.corr_per_dim)):
            lines.append(f"dim{i:02d} nmse={e:.6f} corr={r:.6f}")
        return "\n".join(lines)


def evaluate(pred, target, variance=None) -> EvalReport:
    """NMSE and correlation report.

    Unlike :func:`pearson`, a constant prediction in some dimension is not an
    error here: that dimension's correlation is reported as NaN (undefined),
    which makes ``corr_mean`` NaN too. Constant targets still raise.
    """
    pred, target = _check_pair(pred, target)
    e_mean, e_dim = nmse(pred, target, variance)
    r_dim = _correlation(pred, target, strict=False)
    return EvalReport(e_mean, e_dim.tolist(), float(r_dim.mean()), r_dim.tolist(), len(target))


def evaluate_split(estimator, utterances: Sequence, variance=None) -> EvalReport:
    """Score ``estimator.predict`` over every utterance of a split, frames pooled.

    Each utterance needs ``features`` and ``targets`` attributes.
    """
    if not utterances:
        raise ValueError("empty split")
    preds = [estimator.predict(u.features) for u in utterances]
    targets = [np.asarray(u.targets) for u in utterances]
    return evaluate(np.concatenate(preds), np.concatenate(targets), variance)
