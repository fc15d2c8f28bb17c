"""Binary decision trees stored as flat node arrays.

Two growers share the same :class:`Tree` container:

* :func:`grow_gini_tree` - CART classification with Gini impurity, sample
  weights (bootstrap multiplicities) and per-split feature subsampling.
* :func:`grow_newton_tree` - regression on gradient/hessian pairs with the
  usual second-order gain and L2-shrunk leaf weights, as used by boosting.

Samples go left when ``x[feature] <= threshold``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEAF = -1


@dataclass
class Tree:
    feature: np.ndarray  # int, LEAF for leaves
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray  # (n_nodes, n_outputs)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def depth(self) -> int:
        def walk(node):
            if self.feature[node] == LEAF:
                return 0
            return 1 + max(walk(self.left[node]), walk(self.right[node]))

        return walk(0)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        node = np.zeros(len(X), dtype=np.int64)
        rows = np.arange(len(X))
        while True:
            feat = self.feature[node]
            inner = feat != LEAF
            if not inner.any():
                return node
            go_left = X[rows[inner], feat[inner]] <= self.threshold[node[inner]]
            node[inner] = np.where(go_left, self.left[node[inner]], self.right[node[inner]])

    def predict_value(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_state(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
        }

    @classmethod
    def from_state(cls, state: dict) -> Tree:
        return cls(
            np.asarray(state["feature"], dtype=np.int64),
            np.asarray(state["threshold"], dtype=np.float64),
            np.asarray(state["left"], dtype=np.int64),
            np.asarray(state["right"], dtype=np.int64),
            np.asarray(state["value"], dtype=np.float64).reshape(len(state["feature"]), -1),
        )


class _Builder:
    def __init__(self, n_outputs: int):
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[np.ndarray] = []
        self.n_outputs = n_outputs

    def add(self, value) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(np.asarray(value, dtype=np.float64).reshape(self.n_outputs))
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, left: int, right: int) -> None:
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def build(self) -> Tree:
        return Tree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=np.float64),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.value, dtype=np.float64).reshape(-1, self.n_outputs),
        )


def _midpoint(lo: float, hi: float) -> float:
    mid = (lo + hi) / 2.0
    # adjacent floats can round the midpoint up onto ``hi``
    return lo if mid >= hi else mid


def _sorted_columns(X: np.ndarray, idx: np.ndarray, feats: np.ndarray):
    Xn = X[np.ix_(idx, feats)]
    order = np.argsort(Xn, axis=0, kind="stable")
    return np.take_along_axis(Xn, order, axis=0), idx[order]


def _best_gini_split(X, y, w, idx, feats, n_classes):
    """Return (feature, threshold, weighted child impurity) or None."""
    Xs, rows = _sorted_columns(X, idx, feats)
    n, f = Xs.shape
    onehot = np.zeros((n, f, n_classes))
    onehot[np.arange(n)[:, None], np.arange(f)[None, :], y[rows]] = w[rows]
    left = np.cumsum(onehot, axis=0)[:-1]
    total = onehot.sum(axis=0)
    right = total[None] - left
    n_left = left.sum(axis=2)
    n_right = right.sum(axis=2)
    valid = Xs[1:] > Xs[:-1]
    if not valid.any():
        return None
    with np.errstate(divide="ignore", invalid="ignore"):
        # weighted Gini: n_l*(1 - sum p_l^2) + n_r*(1 - sum p_r^2)
        impurity = (n_left - (left**2).sum(2) / n_left) + (n_right - (right**2).sum(2) / n_right)
    impurity = np.where(valid, impurity, np.inf)
    pos, col = np.unravel_index(np.argmin(impurity), impurity.shape)
    return int(feats[col]), _midpoint(Xs[pos, col], Xs[pos + 1, col]), float(impurity[pos, col])


def grow_gini_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    *,
    weights: np.ndarray | None = None,
    max_depth: int = 12,
    max_features: int | None = None,
    min_samples_split: int = 2,
    rng: np.random.Generator | None = None,
) -> Tree:
    """Grow a classification tree; leaf values are class-probability vectors.

    ``weights`` are non-negative sample multiplicities; rows with zero
    weight are ignored entirely.
    """
    n_samples, n_features = X.shape
    w = np.ones(n_samples) if weights is None else np.asarray(weights, dtype=np.float64)
    max_features = n_features if max_features is None else min(max_features, n_features)
    rng = rng if rng is not None else np.random.default_rng(0)
    b = _Builder(n_classes)

    def grow(idx: np.ndarray, depth: int) -> int:
        counts = np.bincount(y[idx], weights=w[idx], minlength=n_classes)
        total = counts.sum()
        node = b.add(counts / total)
        if depth >= max_depth or len(idx) < min_samples_split or np.count_nonzero(counts) < 2:
            return node
        if max_features < n_features:
            feats = rng.choice(n_features, size=max_features, replace=False)
        else:
            feats = np.arange(n_features)
        found = _best_gini_split(X, y, w, idx, feats, n_classes)
        if found is None:
            return node
        feature, threshold, child_impurity = found
        parent_impurity = total - (counts**2).sum() / total
        if child_impurity >= parent_impurity - 1e-12 * max(total, 1.0):
            return node
        go_left = X[idx, feature] <= threshold
        left = grow(idx[go_left], depth + 1)
        right = grow(idx[~go_left], depth + 1)
        b.split(node, feature, threshold, left, right)
        return node

    grow(np.flatnonzero(w > 0), 0)
    return b.build()


class Binned:
    """Features of a fixed matrix mapped to at most ``max_bins`` ordered bins.

    A feature with few distinct values gets one bin per value and cut points
    at the midpoints, so its candidate splits are exact; otherwise cut points
    are quantiles. Row ``i`` is in bin ``b`` of feature ``j`` when
    ``cuts[j][b-1] < X[i, j] <= cuts[j][b]``.
    """

    def __init__(self, X: np.ndarray, max_bins: int = 256):
        n, d = X.shape
        self.max_bins = max_bins
        self.cuts: list[np.ndarray] = []
        codes = np.empty((n, d), dtype=np.int64)
        for j in range(d):
            uniq = np.unique(X[:, j])
            if len(uniq) <= max_bins:
                cuts = np.array([_midpoint(a, b) for a, b in zip(uniq[:-1], uniq[1:])])
            else:
                qs = np.quantile(uniq, np.linspace(0, 1, max_bins + 1)[1:-1])
                cuts = np.unique(qs)
            self.cuts.append(cuts)
            codes[:, j] = np.searchsorted(cuts, X[:, j], side="left")
        self.n_cuts = np.array([len(c) for c in self.cuts])
        self.flat = codes + np.arange(d)[None, :] * max_bins
        self.shape = (d, max_bins)

    def histograms(self, idx: np.ndarray, g: np.ndarray, h: np.ndarray):
        cells = self.flat[idx].ravel()
        size = self.shape[0] * self.shape[1]
        d = self.shape[0]
        G = np.bincount(cells, weights=np.repeat(g[idx], d), minlength=size).reshape(self.shape)
        H = np.bincount(cells, weights=np.repeat(h[idx], d), minlength=size).reshape(self.shape)
        return G, H


def _best_newton_split(binned, g, h, idx, reg_lambda, min_child_weight):
    G_hist, H_hist = binned.histograms(idx, g, h)
    G_left = np.cumsum(G_hist, axis=1)[:, :-1]
    H_left = np.cumsum(H_hist, axis=1)[:, :-1]
    G, H = g[idx].sum(), h[idx].sum()
    G_right, H_right = G - G_left, H - H_left
    has_cut = np.arange(binned.max_bins - 1)[None, :] < binned.n_cuts[:, None]
    valid = has_cut & (H_left >= min_child_weight) & (H_right >= min_child_weight)
    if not valid.any():
        return None
    score = G_left**2 / (H_left + reg_lambda) + G_right**2 / (H_right + reg_lambda)
    score = np.where(valid, score, -np.inf)
    feature, b = np.unravel_index(np.argmax(score), score.shape)
    gain = 0.5 * (score[feature, b] - G**2 / (H + reg_lambda))
    return int(feature), float(binned.cuts[feature][b]), float(gain)


def grow_newton_tree(
    X: np.ndarray,
    grad: np.ndarray,
    hess: np.ndarray,
    *,
    max_depth: int = 3,
    reg_lambda: float = 1.0,
    min_child_weight: float = 1.0,
    min_split_gain: float = 0.0,
    binned: Binned | None = None,
) -> Tree:
    """Fit a regression tree to a second-order loss expansion.

    Leaf weight is ``-G / (H + reg_lambda)``; a split is kept only when its
    gain exceeds ``min_split_gain``. Pass ``binned`` when growing many trees
    on the same ``X``.
    """
    binned = binned if binned is not None else Binned(X)
    b = _Builder(1)

    def grow(idx: np.ndarray, depth: int) -> int:
        G, H = grad[idx].sum(), hess[idx].sum()
        node = b.add(-G / (H + reg_lambda))
        if depth >= max_depth or len(idx) < 2:
            return node
        found = _best_newton_split(binned, grad, hess, idx, reg_lambda, min_child_weight)
        if found is None or found[2] <= min_split_gain:
            return node
        feature, threshold, _ = found
        go_left = X[idx, feature] <= threshold
        left = grow(idx[go_left], depth + 1)
        right = grow(idx[~go_left], depth + 1)
        b.split(node, feature, threshold, left, right)
        return node

    grow(np.arange(len(X)), 0)
    return b.build()
