from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .tree import Tree, grow_gini_tree


def default_max_features(n_features: int) -> int:
    return max(1, int(round(math.sqrt(n_features))))


class RandomForest:
    """Bagged Gini trees combined by majority vote.

    Tree ``t`` draws its bootstrap sample and split features from a
    generator seeded with ``seed + t``, so the fitted forest does not depend
    on how many threads grew it.
    """

    def __init__(
        self,
        n_trees: int = 100,
        max_depth: int = 12,
        max_features: int | None = None,
        bootstrap: bool = True,
        seed: int = 0,
        threads: int = 1,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.max_features = max_features
        self.bootstrap = bootstrap
        self.seed = seed
        self.threads = threads

    def _grow(self, t: int, X, y) -> Tree:
        rng = np.random.default_rng(self.seed + t)
        n = len(X)
        weights = np.bincount(rng.integers(0, n, size=n), minlength=n) if self.bootstrap else None
        return grow_gini_tree(
            X,
            y,
            self.n_classes,
            weights=weights,
            max_depth=self.max_depth,
            max_features=self.max_features or default_max_features(X.shape[1]),
            rng=rng,
        )

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> RandomForest:
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        self.n_classes = n_classes
        if self.threads > 1:
            with ThreadPoolExecutor(self.threads) as pool:
                self.trees = list(pool.map(lambda t: self._grow(t, X, y), range(self.n_trees)))
        else:
            self.trees = [self._grow(t, X, y) for t in range(self.n_trees)]
        return self

    def tree_votes(self, X: np.ndarray) -> np.ndarray:
        """(n_trees, n_samples) class index voted by each tree."""
        X = np.asarray(X, dtype=np.float64)
        return np.array([t.predict_value(X).argmax(axis=1) for t in self.trees]).reshape(-1, len(X))

    def predict(self, X: np.ndarray) -> np.ndarray:
        votes = self.tree_votes(X)
        tally = np.zeros((votes.shape[1], self.n_classes), dtype=np.int64)
        for row in votes:
            tally[np.arange(len(row)), row] += 1
        return tally.argmax(axis=1)

    def get_state(self) -> dict:
        return {"n_classes": self.n_classes, "trees": [t.to_state() for t in self.trees]}

    def set_state(self, state: dict) -> None:
        self.n_classes = state["n_classes"]
        self.trees = [Tree.from_state(s) for s in state["trees"]]
