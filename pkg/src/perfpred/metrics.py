"""Scoring functions for model outputs and predictor quality."""

from __future__ import annotations

import numpy as np

ROW_SUM_TOL = 1e-6


def accuracy(predictions, golds) -> float:
    """Exact-match accuracy (unnormalized); pass@1 uses the same estimator."""
    if len(predictions) != len(golds):
        raise ValueError("predictions and golds must have equal length")
    if len(predictions) == 0:
        raise ValueError("empty input")
    return sum(1 for p, g in zip(predictions, golds) if p == g) / len(predictions)


def brier(probs, golds) -> float:
    """Multiclass Brier score in [0, 2]; lower is better.

    Rows outside the normalization tolerance are errors, not renormalized:
    silent renormalization could hide harness bugs.
    """
    probs = np.asarray(probs, dtype=float)
    golds = np.asarray(golds, dtype=int)
    if probs.ndim != 2 or len(golds) != probs.shape[0]:
        raise ValueError("probs must be (n, K) with one gold index per row")
    n, k = probs.shape
    bad = np.abs(probs.sum(axis=1) - 1.0) > ROW_SUM_TOL
    if bad.any():
        raise ValueError(f"row {int(np.argmax(bad))} not normalized")
    if (golds < 0).any() or (golds >= k).any():
        raise ValueError("gold index out of range")
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), golds] = 1.0
    return float(((probs - onehot) ** 2).sum(axis=1).mean())


def mae(predictions, actuals) -> float:
    predictions = np.asarray(predictions, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if predictions.shape != actuals.shape:
        raise ValueError("length mismatch")
    if predictions.size == 0:
        raise ValueError("empty input")
    return float(np.abs(predictions - actuals).mean())


def r_squared(predictions, actuals) -> float:
    predictions = np.asarray(predictions, dtype=float)
    actuals = np.asarray(actuals, dtype=float)
    if predictions.shape != actuals.shape:
        raise ValueError("length mismatch")
    ss_tot = float(((actuals - actuals.mean()) ** 2).sum())
    if ss_tot == 0.0:
        raise ValueError("actuals have zero variance")
    ss_res = float(((actuals - predictions) ** 2).sum())
    return 1.0 - ss_res / ss_tot
