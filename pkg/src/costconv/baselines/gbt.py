"""Squared-error gradient boosting over depth-limited regression trees."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GbtConfig:
    n_trees: int = 100
    max_depth: int = 3
    shrinkage: float = 0.1
    min_leaf: int = 5


@dataclass
class Tree:
    # parallel arrays; feature == -1 marks a leaf
    feature: list = field(default_factory=list)
    threshold: list = field(default_factory=list)
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    value: list = field(default_factory=list)

    def _add(self, value) -> int:
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(value))
        return len(self.value) - 1

    def predict(self, X) -> np.ndarray:
        X = np.atleast_2d(X)
        node = np.zeros(X.shape[0], dtype=np.int64)
        feat = np.array(self.feature)
        thr = np.array(self.threshold)
        left = np.array(self.left)
        right = np.array(self.right)
        active = feat[node] >= 0
        while np.any(active):
            idx = np.nonzero(active)[0]
            f = feat[node[idx]]
            go_left = X[idx, f] <= thr[node[idx]]
            node[idx] = np.where(go_left, left[node[idx]], right[node[idx]])
            active = feat[node] >= 0
        return np.array(self.value)[node]


def _best_split(Xs, order, y, members, min_leaf):
    """Best (gain, feature, threshold) for the samples flagged in ``members``.

    ``order`` holds each column's argsort over all samples, so a node's sorted
    view is the column order filtered by membership.
    """
    n_node = int(members.sum())
    if n_node < 2 * min_leaf:
        return None
    D = Xs.shape[1]
    sel = members[order]  # (n, D) membership in sorted order per column
    idx = order.T[sel.T].reshape(D, n_node)  # per column, node samples in ascending x
    xs = np.take_along_axis(Xs.T, idx, axis=1)
    ys = y[idx]
    csum = np.cumsum(ys, axis=1)
    total = csum[:, -1:]
    k = np.arange(1, n_node)  # left-part sizes
    left_sum = csum[:, :-1]
    right_sum = total - left_sum
    # reduction in squared error for splitting after position k-1
    gain = left_sum ** 2 / k + right_sum ** 2 / (n_node - k) - total ** 2 / n_node
    ok = xs[:, :-1] < xs[:, 1:]
    ok[:, : min_leaf - 1] = False
    if min_leaf > 1:
        ok[:, n_node - min_leaf:] = False
    gain = np.where(ok, gain, -np.inf)
    flat = int(np.argmax(gain))
    d, pos = divmod(flat, n_node - 1)
    best = gain[d, pos]
    if not np.isfinite(best) or best <= 1e-12 * max(1.0, float(np.abs(total[d, 0]))):
        return None
    thr = (xs[d, pos] + xs[d, pos + 1]) / 2.0
    if not thr < xs[d, pos + 1]:
        thr = xs[d, pos]
    return best, d, float(thr)


def fit_tree(X, order, residual, config: GbtConfig) -> Tree:
    tree = Tree()
    root = tree._add(residual.mean())
    stack = [(root, np.ones(X.shape[0], dtype=bool), 0)]
    while stack:
        node, members, depth = stack.pop()
        if depth >= config.max_depth:
            continue
        split = _best_split(X, order, residual, members, config.min_leaf)
        if split is None:
            continue
        _, d, thr = split
        go_left = members & (X[:, d] <= thr)
        go_right = members & ~go_left
        tree.feature[node] = d
        tree.threshold[node] = thr
        li = tree._add(residual[go_left].mean())
        ri = tree._add(residual[go_right].mean())
        tree.left[node], tree.right[node] = li, ri
        stack.append((ri, go_right, depth + 1))
        stack.append((li, go_left, depth + 1))
    return tree


@dataclass
class GbtModel:
    initial: float
    trees: list
    shrinkage: float
    target_transform: str = "identity"

    def predict_raw(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        out = np.full(X.shape[0], self.initial)
        for t in self.trees:
            out += self.shrinkage * t.predict(X)
        return out

    def predict(self, X) -> np.ndarray:
        raw = self.predict_raw(X)
        return np.expm1(raw) if self.target_transform == "log1p" else raw


def gbt_fit(features, targets, config: GbtConfig = GbtConfig(), target_transform: str = "identity") -> GbtModel:
    """Each tree fits the residual target - current prediction (squared-error boosting)."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(targets, dtype=np.float64)
    if y.ndim != 1 or y.size == 0:
        raise ValueError("need at least one target")
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"features must be (N, D) with N={y.size}, got {X.shape}")
    if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
        raise ValueError("features and targets must be finite")
    t = np.log1p(y) if target_transform == "log1p" else y
    model = GbtModel(float(t.mean()), [], config.shrinkage, target_transform)
    if X.shape[1] == 0:
        return model
    order = np.argsort(X, axis=0, kind="stable")
    current = np.full(y.size, model.initial)
    for _ in range(config.n_trees):
        tree = fit_tree(X, order, t - current, config)
        model.trees.append(tree)
        current += config.shrinkage * tree.predict(X)
    return model


def gbt_predict(model: GbtModel, row) -> float:
    return float(model.predict(np.asarray(row, dtype=np.float64)[None, :])[0])
