"""Exact Shapley attributions for tree ensembles.

Uses the polynomial-time path algorithm with the training cover counts
stored in each node as the background distribution (path-dependent
expectations). Local accuracy holds exactly: base value plus the attribution
vector reproduces the ensemble prediction for every explained row.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .gbtree import TreeEnsemble, TreeNode
from .registry import FeatureMatrix


@dataclass
class _PathEl:
    d: int  # feature index, -1 for the root placeholder
    z: float  # fraction of paths flowing through when the feature is excluded
    o: float  # indicator-weighted fraction when the feature is included
    w: float  # permutation weight


def _extend(path: list[_PathEl], pz: float, po: float, pi: int) -> None:
    l = len(path)
    path.append(_PathEl(pi, pz, po, 1.0 if l == 0 else 0.0))
    for i in range(l - 1, -1, -1):
        path[i + 1].w += po * path[i].w * (i + 1) / (l + 1)
        path[i].w = pz * path[i].w * (l - i) / (l + 1)


def _unwound_weights(path: list[_PathEl], index: int) -> list[float]:
    """Weights of the path with element ``index`` removed (inverts _extend)."""
    l = len(path) - 1
    o, z = path[index].o, path[index].z
    w = [0.0] * l
    if o != 0.0:
        n = path[l].w
        for i in range(l - 1, -1, -1):
            w[i] = n * (l + 1) / ((i + 1) * o)
            n = path[i].w - w[i] * z * (l - i) / (l + 1)
    else:
        for i in range(l - 1, -1, -1):
            w[i] = path[i].w * (l + 1) / (z * (l - i))
    return w


def _unwind(path: list[_PathEl], index: int) -> list[_PathEl]:
    w = _unwound_weights(path, index)
    kept = [el for i, el in enumerate(path) if i != index]
    return [_PathEl(el.d, el.z, el.o, w[i]) for i, el in enumerate(kept)]


def _tree_phi(root: TreeNode, x: np.ndarray, miss: np.ndarray, phi: np.ndarray) -> None:
    def rec(node: TreeNode, path: list[_PathEl], pz: float, po: float, pi: int) -> None:
        path = [_PathEl(el.d, el.z, el.o, el.w) for el in path]
        _extend(path, pz, po, pi)
        if node.is_leaf:
            for i in range(1, len(path)):
                w = sum(_unwound_weights(path, i))
                el = path[i]
                phi[el.d] += w * (el.o - el.z) * node.leaf_value
            return
        j = node.split_feature
        if miss[j] or np.isnan(x[j]):
            hot = node.left if node.default_left else node.right
        elif x[j] < node.threshold:
            hot = node.left
        else:
            hot = node.right
        cold = node.right if hot is node.left else node.left
        iz, io = 1.0, 1.0
        k = next((i for i, el in enumerate(path) if el.d == j), None)
        if k is not None:
            iz, io = path[k].z, path[k].o
            path = _unwind(path, k)
        rec(hot, path, iz * hot.cover / node.cover, io, j)
        rec(cold, path, iz * cold.cover / node.cover, 0.0, j)

    rec(root, [], 1.0, 1.0, -1)


def tree_expectation(node: TreeNode) -> float:
    """Cover-weighted mean of the leaves (empty-coalition expectation)."""
    if node.is_leaf:
        return node.leaf_value
    return (node.left.cover * tree_expectation(node.left)
            + node.right.cover * tree_expectation(node.right)) / node.cover


def tree_shap(ensemble: TreeEnsemble, x: np.ndarray,
              miss: np.ndarray | None = None) -> tuple[np.ndarray, float]:
    """Attribution vector and base value for one feature row."""
    x = np.asarray(x, dtype=float)
    if len(x) != len(ensemble.column_names):
        raise ValueError("column mismatch")
    if miss is None:
        miss = np.isnan(x)
    phi = np.zeros(len(x))
    base = ensemble.base_score
    for tree in ensemble.trees:
        _tree_phi(tree, x, miss, phi)
        base += ensemble.learning_rate * tree_expectation(tree)
    return ensemble.learning_rate * phi, float(base)


@dataclass(frozen=True)
class ShapMatrix:
    model_ids: tuple[str, ...]
    feature_names: tuple[str, ...]
    values: np.ndarray  # (n, p) attributions
    base_value: float


def shap_matrix(ensemble: TreeEnsemble, X: FeatureMatrix) -> ShapMatrix:
    if X.column_names != ensemble.column_names:
        raise ValueError("column mismatch")
    rows = []
    base = ensemble.base_score + ensemble.learning_rate * sum(
        tree_expectation(t) for t in ensemble.trees)
    for i in range(len(X.model_ids)):
        phi, _ = tree_shap(ensemble, X.values[i], X.missing_mask[i])
        rows.append(phi)
    return ShapMatrix(X.model_ids, X.column_names, np.array(rows), float(base))


@dataclass(frozen=True)
class SummaryEntry:
    feature: str
    mean_abs_phi: float
    points: tuple  # (feature value or level, phi) per row


def _onehot_base(name: str) -> str | None:
    return name.split("=", 1)[0] if "=" in name else None


def shap_summary(ensemble: TreeEnsemble, X: FeatureMatrix,
                 aggregate_categoricals: bool = False) -> list[SummaryEntry]:
    """Features ranked by mean absolute attribution, descending; ties by name.

    With ``aggregate_categoricals`` the one-hot member columns of each
    categorical feature are summed into a single entry whose per-row value is
    the active level name.
    """
    if len(X.model_ids) == 0:
        raise ValueError("empty feature matrix")
    sm = shap_matrix(ensemble, X)
    entries: list[SummaryEntry] = []
    if not aggregate_categoricals:
        for j, name in enumerate(sm.feature_names):
            pts = tuple((float(X.values[i, j]), float(sm.values[i, j]))
                        for i in range(len(sm.model_ids)))
            entries.append(SummaryEntry(name, float(np.abs(sm.values[:, j]).mean()), pts))
    else:
        groups: dict[str, list[int]] = {}
        for j, name in enumerate(sm.feature_names):
            groups.setdefault(_onehot_base(name) or name, []).append(j)
        for gname, cols in groups.items():
            total = sm.values[:, cols].sum(axis=1)
            pts = []
            for i in range(len(sm.model_ids)):
                if len(cols) == 1:
                    value = float(X.values[i, cols[0]])
                else:
                    active = [sm.feature_names[j].split("=", 1)[1]
                              for j in cols if X.values[i, j] == 1.0]
                    value = active[0] if active else None
                pts.append((value, float(total[i])))
            entries.append(SummaryEntry(gname, float(np.abs(total).mean()), tuple(pts)))
    entries.sort(key=lambda e: (-e.mean_abs_phi, e.feature))
    return entries


def shap_dependence(ensemble: TreeEnsemble, X: FeatureMatrix,
                    feature_name: str) -> tuple[list[tuple[float, float]], int]:
    """(feature value, phi) per row with a present value, plus missing count."""
    if feature_name not in X.column_names:
        raise ValueError(f"unknown feature: {feature_name}")
    j = X.column_names.index(feature_name)
    sm = shap_matrix(ensemble, X)
    points = []
    n_missing = 0
    for i in range(len(X.model_ids)):
        if X.missing_mask[i, j]:
            n_missing += 1
        else:
            points.append((float(X.values[i, j]), float(sm.values[i, j])))
    return points, n_missing
