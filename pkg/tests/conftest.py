"""Shared fixtures and slow-but-obviously-correct reference implementations."""

from __future__ import annotations

import copy
import math
from itertools import combinations

import numpy as np
import pytest

from perfpred.gbtree import GBTConfig, TreeEnsemble, TreeNode, fit_gbt
from perfpred.registry import Registry, TaskSpec, join_scores, validate_raw_records
from perfpred.registry import ScoreRecord


def raw_record(model_id="m1", **overrides):
    rec = {
        "model_id": model_id,
        "organization": "org",
        "arch": {
            "total_params": 1.0e9,
            "dimension": 1024,
            "num_heads": 16,
            "activation": "gelu",
            "layer_norm": "rmsnorm",
            "positional_embeddings": "rope",
        },
        "data": {
            "total_tokens_billions": 300.0,
            "pct_web": 60.0,
            "pct_code": 10.0,
            "pct_books": 5.0,
        },
        "gen": {"entropy_mean": 4.5, "question_words_ratio": 120.0},
        "provenance": "reported",
    }
    rec = copy.deepcopy(rec)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(rec.get(key), dict):
            rec[key].update(value)
            rec[key] = {k: v for k, v in rec[key].items() if v is not None}
        else:
            rec[key] = value
    return rec


def small_dataset(n=6, metric_kind="accuracy", score_fn=None):
    """A tiny hand-constructed dataset spanning >1 OOM in N and D."""
    # token exponents deliberately out of step with the parameter exponents
    # so log N and log D are not collinear across the records
    raws = [
        raw_record(f"m{i}",
                   arch={"total_params": 1.0e8 * (4 ** i)},
                   data={"total_tokens_billions": 50.0 * (3 ** (i ^ 1 if i else 0))})
        for i in range(n)
    ]
    records, violations = validate_raw_records(raws)
    assert not violations, violations
    registry = Registry(records)
    task = TaskSpec.for_metric("toy", 0, metric_kind)
    if score_fn is None:
        score_fn = lambda r: 0.1 + 0.08 * (math.log10(r.arch.total_params) - 8.0)
    scores = [ScoreRecord(r.model_id, "toy", score_fn(r)) for r in records]
    return join_scores(registry, scores, task)


# ---------------------------------------------------------------------------
# reference Shapley by coalition enumeration


def _cond_expectation(node: TreeNode, x, miss, coalition: set) -> float:
    if node.is_leaf:
        return node.leaf_value
    j = node.split_feature
    if j in coalition:
        if miss[j] or np.isnan(x[j]):
            child = node.left if node.default_left else node.right
        elif x[j] < node.threshold:
            child = node.left
        else:
            child = node.right
        return _cond_expectation(child, x, miss, coalition)
    return (node.left.cover * _cond_expectation(node.left, x, miss, coalition)
            + node.right.cover * _cond_expectation(node.right, x, miss, coalition)
            ) / node.cover


def brute_shapley(ensemble: TreeEnsemble, x, miss=None):
    """Exact Shapley values by enumerating all 2^p coalitions."""
    x = np.asarray(x, dtype=float)
    if miss is None:
        miss = np.isnan(x)
    p = len(ensemble.column_names)

    cache = {}

    def v(coalition: frozenset) -> float:
        if coalition not in cache:
            total = ensemble.base_score
            for tree in ensemble.trees:
                total += ensemble.learning_rate * _cond_expectation(tree, x, miss, coalition)
            cache[coalition] = total
        return cache[coalition]

    phi = np.zeros(p)
    others = list(range(p))
    for i in range(p):
        rest = [j for j in others if j != i]
        for size in range(p):
            weight = (math.factorial(size) * math.factorial(p - size - 1)
                      / math.factorial(p))
            for subset in combinations(rest, size):
                s = frozenset(subset)
                phi[i] += weight * (v(s | {i}) - v(s))
    return phi, v(frozenset())


def random_fitted_ensemble(rng, p=None, n_rows=25, n_trees=3, depth=3,
                           missing_rate=0.2):
    """Fit a real GBT on random data so covers and defaults are authentic."""
    p = p or rng.randint(11) + 2  # 2..12 features
    X = np.array([[rng.normal() for _ in range(p)] for _ in range(n_rows)])
    y = np.array([rng.normal() for _ in range(n_rows)])
    if missing_rate:
        for i in range(n_rows):
            for j in range(p):
                if rng.uniform() < missing_rate:
                    X[i, j] = np.nan
        # keep at least one present value per column so splits exist
        for j in range(p):
            if np.isnan(X[:, j]).all():
                X[0, j] = 0.0
    config = GBTConfig(max_depth=depth, learning_rate=0.5, n_trees=n_trees,
                       min_samples_leaf=2)
    return fit_gbt(X, y, config), X
