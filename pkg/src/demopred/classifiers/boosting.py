from __future__ import annotations

import numpy as np

from .mlp import softmax
from .tree import Binned, Tree, grow_newton_tree


def cross_entropy(F: np.ndarray, y: np.ndarray) -> float:
    """Mean softmax cross-entropy of raw scores ``F`` against class indices ``y``."""
    shifted = F - F.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    return float(np.mean(log_norm - shifted[np.arange(len(y)), y]))


class GradientBoosting:
    """Multi-class gradient boosting on softmax scores.

    Every round fits one depth-limited regression tree per class to the
    gradient and diagonal hessian of the cross-entropy (a Newton step per
    class score), then adds it with shrinkage ``learning_rate``. Scores start
    at the log class priors. Split search is histogram-based over at most
    ``max_bins`` bins per feature.
    """

    def __init__(
        self,
        n_rounds: int = 200,
        max_depth: int = 3,
        learning_rate: float = 0.1,
        reg_lambda: float = 1.0,
        min_child_weight: float = 1.0,
        max_bins: int = 256,
    ):
        self.n_rounds = n_rounds
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.reg_lambda = reg_lambda
        self.min_child_weight = min_child_weight
        self.max_bins = max_bins

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> GradientBoosting:
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
        Y = np.eye(n_classes)[y]
        prior = np.bincount(y, minlength=n_classes) / len(y)
        self.base_score = np.log(np.maximum(prior, 1e-12))
        F = np.tile(self.base_score, (len(X), 1))
        self.rounds: list[list[Tree]] = []
        self.train_loss = [cross_entropy(F, y)]
        binned = Binned(X, self.max_bins)
        for _ in range(self.n_rounds):
            P = softmax(F)
            trees = []
            for k in range(n_classes):
                grad = P[:, k] - Y[:, k]
                hess = np.maximum(P[:, k] * (1.0 - P[:, k]), 1e-16)
                trees.append(
                    grow_newton_tree(
                        X,
                        grad,
                        hess,
                        max_depth=self.max_depth,
                        reg_lambda=self.reg_lambda,
                        min_child_weight=self.min_child_weight,
                        binned=binned,
                    )
                )
            for k, tree in enumerate(trees):
                F[:, k] += self.learning_rate * tree.predict_value(X)[:, 0]
            self.rounds.append(trees)
            self.train_loss.append(cross_entropy(F, y))
        return self

    def decision_function(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        F = np.tile(self.base_score, (len(X), 1))
        for trees in self.rounds:
            for k, tree in enumerate(trees):
                F[:, k] += self.learning_rate * tree.predict_value(X)[:, 0]
        return F

    def staged_loss(self, X: np.ndarray, y: np.ndarray) -> list[float]:
        """Cross-entropy after 0, 1, ..., n_rounds rounds."""
        X = np.asarray(X, dtype=np.float64)
        F = np.tile(self.base_score, (len(X), 1))
        out = [cross_entropy(F, y)]
        for trees in self.rounds:
            for k, tree in enumerate(trees):
                F[:, k] += self.learning_rate * tree.predict_value(X)[:, 0]
            out.append(cross_entropy(F, y))
        return out

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.decision_function(X).argmax(axis=1)

    def get_state(self) -> dict:
        return {
            "base_score": self.base_score.tolist(),
            "rounds": [[t.to_state() for t in trees] for trees in self.rounds],
        }

    def set_state(self, state: dict) -> None:
        self.base_score = np.asarray(state["base_score"], dtype=np.float64)
        self.rounds = [[Tree.from_state(s) for s in trees] for trees in state["rounds"]]
