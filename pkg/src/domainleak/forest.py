"""Random-forest membership classifier: bagged Gini trees over feature vectors.

Small by design: the attack trains on a few hundred 5d-dimensional feature
vectors, so a compact implementation keeps the whole toolchain seedable
through RandomStream and free of heavyweight dependencies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mechanisms import RandomStream


@dataclass
class _Node:
    feature: int = -1
    threshold: float = 0.0
    left: "_Node | None" = None
    right: "_Node | None" = None
    vote: float = 0.5  # leaf vote: fraction of class-1 samples, 0/1 when pure

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _best_split(X: np.ndarray, y: np.ndarray, features: np.ndarray):
    """Smallest weighted Gini over midpoint thresholds of the given features."""
    n = y.size
    total_pos = y.sum()
    best = (None, None, None)  # (gini, feature, threshold)
    for f in features:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        distinct = np.nonzero(np.diff(xs))[0]  # split between xs[i] and xs[i+1]
        if distinct.size == 0:
            continue
        pos_left = np.cumsum(ys)[distinct]
        n_left = distinct + 1
        n_right = n - n_left
        pos_right = total_pos - pos_left
        p_l = pos_left / n_left
        p_r = pos_right / n_right
        gini = (n_left * 2 * p_l * (1 - p_l) + n_right * 2 * p_r * (1 - p_r)) / n
        i = int(np.argmin(gini))
        if best[0] is None or gini[i] < best[0]:
            best = (float(gini[i]), int(f), float((xs[distinct[i]] + xs[distinct[i] + 1]) / 2))
    return best


def _grow(X: np.ndarray, y: np.ndarray, n_candidates: int, rng: RandomStream) -> _Node:
    node = _Node()
    if y.size == 0:
        return node
    pos = y.sum()
    if pos == 0 or pos == y.size:
        node.vote = float(pos > 0)
        return node
    features = rng.gen.choice(X.shape[1], size=n_candidates, replace=False)
    gini, f, thr = _best_split(X, y, features)
    if f is None:
        node.vote = float(pos / y.size)
        return node
    mask = X[:, f] <= thr
    if not mask.any() or mask.all():
        node.vote = float(pos / y.size)
        return node
    node.feature = f
    node.threshold = thr
    node.left = _grow(X[mask], y[mask], n_candidates, rng.child("L"))
    node.right = _grow(X[~mask], y[~mask], n_candidates, rng.child("R"))
    return node


def _tree_predict(node: _Node, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    stack = [(node, np.arange(X.shape[0]))]
    while stack:
        nd, idx = stack.pop()
        if nd.is_leaf:
            out[idx] = 1.0 if nd.vote > 0.5 else (0.0 if nd.vote < 0.5 else 0.5)
            continue
        mask = X[idx, nd.feature] <= nd.threshold
        stack.append((nd.left, idx[mask]))
        stack.append((nd.right, idx[~mask]))
    return out


class RandomForest:
    """100 fully grown Gini trees on bootstrap resamples.

    Each split considers floor(sqrt(#features)) candidate features; the
    score of a sample is the fraction of trees voting class 1.
    """

    def __init__(self, n_trees: int = 100):
        self.n_trees = n_trees
        self.trees: list[_Node] = []

    def fit(self, X: np.ndarray, y: np.ndarray, rng: RandomStream) -> "RandomForest":
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        if set(np.unique(y)) != {0, 1}:
            raise ValueError("training labels must contain both classes 0 and 1")
        n, n_features = X.shape
        n_candidates = max(1, math.floor(math.sqrt(n_features)))
        self.trees = []
        for t in range(self.n_trees):
            t_rng = rng.child("tree", t)
            boot = t_rng.gen.integers(n, size=n)
            yb = y[boot]
            if yb.min() == yb.max():  # degenerate resample: vote its class
                leaf = _Node()
                leaf.vote = float(yb[0])
                self.trees.append(leaf)
                continue
            self.trees.append(_grow(X[boot], yb, n_candidates, t_rng.child("grow")))
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        if not self.trees:
            raise ValueError("forest is not fitted")
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += _tree_predict(tree, X)
        return votes / len(self.trees)
