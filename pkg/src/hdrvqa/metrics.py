"""Correlation and error metrics shared by cross-validation and evaluation."""

from __future__ import annotations

import numpy as np
from scipy.stats import rankdata

from .errors import NumericError


def _pair(a, b, min_len):
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    if a.size < min_len:
        raise ValueError(f"need at least {min_len} values, got {a.size}")
    return a, b


def pearson(a, b) -> float:
    a, b = _pair(a, b, 2)
    da = a - a.mean()
    db = b - b.mean()
    den = np.sqrt(np.dot(da, da) * np.dot(db, db))
    if den == 0.0:
        raise NumericError("correlation undefined for a constant vector")
    return float(np.clip(np.dot(da, db) / den, -1.0, 1.0))


def srocc(pred, mos) -> float:
    """Spearman correlation: Pearson correlation of mid-ranks."""
    pred, mos = _pair(pred, mos, 3)
    return pearson(rankdata(pred), rankdata(mos))


def lcc_rmse(mapped_pred, mos) -> tuple[float, float]:
    mapped_pred, mos = _pair(mapped_pred, mos, 2)
    rmse = float(np.sqrt(np.mean((mapped_pred - mos) ** 2)))
    return pearson(mapped_pred, mos), rmse
