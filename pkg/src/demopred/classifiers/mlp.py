from __future__ import annotations

import numpy as np


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def loss_and_grads(params: dict, X: np.ndarray, Y: np.ndarray) -> tuple[float, dict]:
    """Mean cross-entropy of a one-hidden-layer ReLU net and its gradients.

    ``Y`` is one-hot, shape (n, n_classes).
    """
    W1, b1, W2, b2 = params["W1"], params["b1"], params["W2"], params["b2"]
    n = len(X)
    Z1 = X @ W1 + b1
    A1 = np.maximum(Z1, 0.0)
    P = softmax(A1 @ W2 + b2)
    loss = -np.sum(Y * np.log(np.clip(P, 1e-300, None))) / n

    dZ2 = (P - Y) / n
    dA1 = dZ2 @ W2.T
    dZ1 = dA1 * (Z1 > 0)
    grads = {
        "W1": X.T @ dZ1,
        "b1": dZ1.sum(axis=0),
        "W2": A1.T @ dZ2,
        "b2": dZ2.sum(axis=0),
    }
    return float(loss), grads


class MLPClassifier:
    """One hidden ReLU layer, softmax output, plain minibatch SGD."""

    def __init__(
        self,
        hidden: int = 64,
        learning_rate: float = 0.01,
        epochs: int = 200,
        batch_size: int = 32,
        seed: int = 0,
    ):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.epochs = epochs
        self.batch_size = batch_size
        self.seed = seed

    def init_params(self, n_features: int, n_classes: int, rng: np.random.Generator) -> dict:
        return {
            "W1": xavier_uniform(rng, n_features, self.hidden),
            "b1": np.zeros(self.hidden),
            "W2": xavier_uniform(rng, self.hidden, n_classes),
            "b2": np.zeros(n_classes),
        }

    def fit(self, X: np.ndarray, y: np.ndarray, n_classes: int) -> MLPClassifier:
        X = np.asarray(X, dtype=np.float64)
        Y = np.eye(n_classes)[np.asarray(y, dtype=np.int64)]
        rng = np.random.default_rng(self.seed)
        self.params = self.init_params(X.shape[1], n_classes, rng)
        self.loss_curve = []
        for _ in range(self.epochs):
            order = rng.permutation(len(X))
            for start in range(0, len(X), self.batch_size):
                batch = order[start : start + self.batch_size]
                _, grads = loss_and_grads(self.params, X[batch], Y[batch])
                for name, g in grads.items():
                    self.params[name] -= self.learning_rate * g
            self.loss_curve.append(loss_and_grads(self.params, X, Y)[0])
        return self

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        p = self.params
        return softmax(np.maximum(X @ p["W1"] + p["b1"], 0.0) @ p["W2"] + p["b2"])

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.predict_proba(X).argmax(axis=1)

    def get_state(self) -> dict:
        return {name: value.tolist() for name, value in self.params.items()}

    def set_state(self, state: dict) -> None:
        self.params = {name: np.asarray(value, dtype=np.float64) for name, value in state.items()}
