from __future__ import annotations

import numpy as np


class KNNClassifier:
    """k-nearest neighbours with Euclidean distance.

    Neighbour selection orders candidates by (distance, label index), and the
    vote is won by the smallest label index among tied classes. Neither rule
    looks at training-set order, so predictions are invariant to permuting
    the training data.
    """

    def __init__(self, k: int = 15, chunk_size: int = 64):
        self.k = k
        self.chunk_size = chunk_size

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> KNNClassifier:
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.int64)
        self.n_classes = n_classes
        return self

    def _neighbours(self, Q: np.ndarray) -> np.ndarray:
        k = min(self.k, len(self.X))
        out = np.empty((len(Q), k), dtype=np.int64)
        for start in range(0, len(Q), self.chunk_size):
            q = Q[start : start + self.chunk_size]
            # explicit differences: each distance is computed the same way
            # whatever its position, unlike the |a|^2 + |b|^2 - 2ab expansion
            d2 = ((q[:, None, :] - self.X[None, :, :]) ** 2).sum(axis=2)
            for i, row in enumerate(d2):
                out[start + i] = np.lexsort((self.y, row))[:k]
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        nn = self._neighbours(np.asarray(X, dtype=np.float64))
        votes = np.zeros((len(nn), self.n_classes), dtype=np.int64)
        np.add.at(votes, (np.arange(len(nn))[:, None], self.y[nn]), 1)
        return votes.argmax(axis=1)

    def get_state(self) -> dict:
        return {"X": self.X.tolist(), "y": self.y.tolist(), "n_classes": self.n_classes}

    def set_state(self, state: dict) -> None:
        self.X = np.asarray(state["X"], dtype=np.float64).reshape(len(state["y"]), -1)
        self.y = np.asarray(state["y"], dtype=np.int64)
        self.n_classes = state["n_classes"]
