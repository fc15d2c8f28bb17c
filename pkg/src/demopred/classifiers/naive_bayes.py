from __future__ import annotations

import numpy as np


class GaussianNB:
    """Gaussian naive Bayes with per-class, per-feature variances.

    Variances are floored at ``var_floor`` so constant features (common
    among sparse genre fractions) do not produce infinite likelihoods.
    """

    def __init__(self, var_floor: float = 1e-9):
        self.var_floor = var_floor

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> GaussianNB:
        X = np.asarray(X, dtype=np.float64)
        self.means = np.zeros((n_classes, X.shape[1]))
        self.vars = np.ones((n_classes, X.shape[1]))
        self.log_priors = np.full(n_classes, -np.inf)
        for c in range(n_classes):
            Xc = X[y == c]
            if len(Xc) == 0:
                continue
            self.means[c] = Xc.mean(axis=0)
            self.vars[c] = np.maximum(Xc.var(axis=0), self.var_floor)
            self.log_priors[c] = np.log(len(Xc) / len(X))
        return self

    def joint_log_likelihood(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        diff = X[:, None, :] - self.means[None]
        ll = -0.5 * (np.log(2 * np.pi * self.vars)[None] + diff**2 / self.vars[None]).sum(axis=2)
        return ll + self.log_priors[None]

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.joint_log_likelihood(X).argmax(axis=1)

    def get_state(self) -> dict:
        return {
            "means": self.means.tolist(),
            "vars": self.vars.tolist(),
            "log_priors": [float(p) if np.isfinite(p) else None for p in self.log_priors],
        }

    def set_state(self, state: dict) -> None:
        self.means = np.asarray(state["means"], dtype=np.float64)
        self.vars = np.asarray(state["vars"], dtype=np.float64)
        self.log_priors = np.array([-np.inf if p is None else p for p in state["log_priors"]])
