"""Small fully connected regressor trained with Adam, written out in numpy.

The estimator follows the scikit-learn conventions (constructor stores
hyperparameters only, ``fit`` returns ``self``, learned state ends in ``_``)
so it can be cloned, grid-searched and scored like any other regressor.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, validate_data

log = logging.getLogger(__name__)

FORMAT = "GEOPROOF-MLP"
VERSION = 1


class EmptyDataset(ValueError):
    pass


class MLPRegressor(RegressorMixin, BaseEstimator):
    """ReLU network trained on mean squared error.

    Parameters
    ----------
    hidden : tuple of int
        Widths of the hidden layers.
    learning_rate, beta1, beta2, epsilon : float
        Adam settings.
    batch_size, epochs : int
    random_state : int
        Seeds initialisation and batch order; training is deterministic.
    clamp : bool
        Clip predictions to [0, 1].
    """

    def __init__(
        self,
        hidden=(128, 64),
        learning_rate=1e-3,
        batch_size=32,
        epochs=10,
        beta1=0.9,
        beta2=0.999,
        epsilon=1e-8,
        random_state=0,
        clamp=True,
    ):
        self.hidden = hidden
        self.learning_rate = learning_rate
        self.batch_size = batch_size
        self.epochs = epochs
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.random_state = random_state
        self.clamp = clamp

    # network ----------------------------------------------------------------

    def _init(self, n_in: int, rng: np.random.Generator) -> list[np.ndarray]:
        sizes = [n_in, *self.hidden, 1]
        params = []
        for a, b in zip(sizes[:-1], sizes[1:]):
            params.append(rng.normal(0.0, np.sqrt(2.0 / a), size=(a, b)))
            params.append(np.zeros(b))
        return params

    @staticmethod
    def _forward(params, X):
        acts = [X]
        h = X
        n = len(params) // 2
        for i in range(n):
            z = h @ params[2 * i] + params[2 * i + 1]
            h = np.maximum(z, 0.0) if i < n - 1 else z
            acts.append(h)
        return acts

    @classmethod
    def loss_and_grads(cls, params, X, y):
        """MSE and its gradient with respect to every weight and bias."""
        acts = cls._forward(params, X)
        out = acts[-1][:, 0]
        diff = out - y
        loss = float(np.mean(diff**2))
        delta = (2.0 / len(y)) * diff[:, None]
        grads = [None] * len(params)
        for i in reversed(range(len(params) // 2)):
            grads[2 * i] = acts[i].T @ delta
            grads[2 * i + 1] = delta.sum(axis=0)
            if i:
                delta = (delta @ params[2 * i].T) * (acts[i] > 0)
        return loss, grads

    # estimator API ----------------------------------------------------------

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
        if len(y) == 0:
            raise EmptyDataset("no training rows")
        self.n_features_in_ = X.shape[1]
        rng = np.random.default_rng(self.random_state)
        params = self._init(X.shape[1], rng)
        m = [np.zeros_like(p) for p in params]
        v = [np.zeros_like(p) for p in params]
        t = 0
        self.loss_curve_ = []
        for epoch in range(self.epochs):
            order = rng.permutation(len(y))
            total = 0.0
            for start in range(0, len(y), self.batch_size):
                idx = order[start : start + self.batch_size]
                loss, grads = self.loss_and_grads(params, X[idx], y[idx])
                total += loss * len(idx)
                t += 1
                for p, g, mi, vi in zip(params, grads, m, v):
                    mi *= self.beta1
                    mi += (1 - self.beta1) * g
                    vi *= self.beta2
                    vi += (1 - self.beta2) * g * g
                    mhat = mi / (1 - self.beta1**t)
                    vhat = vi / (1 - self.beta2**t)
                    p -= self.learning_rate * mhat / (np.sqrt(vhat) + self.epsilon)
            self.loss_curve_.append(total / len(y))
            log.info("epoch %d loss %.6f", epoch + 1, self.loss_curve_[-1])
        self.params_ = params
        return self

    def predict_raw(self, X) -> np.ndarray:
        check_is_fitted(self, "params_")
        X = validate_data(self, X, dtype=np.float64, reset=False)
        return self._forward(self.params_, X)[-1][:, 0]

    def predict(self, X) -> np.ndarray:
        out = self.predict_raw(X)
        return np.clip(out, 0.0, 1.0) if self.clamp else out

    # persistence -------------------------------------------------------------

    def save(self, path: str | Path, **extra) -> None:
        """Write a one-line JSON header followed by the float64 weights."""
        check_is_fitted(self, "params_")
        header = {
            "format": FORMAT,
            "version": VERSION,
            "shapes": [list(p.shape) for p in self.params_],
            "hyperparameters": self.get_params(),
            "n_features_in": self.n_features_in_,
            "loss_curve": self.loss_curve_,
            **extra,
        }
        header["hyperparameters"]["hidden"] = list(self.hidden)
        with open(path, "wb") as fh:
            fh.write(json.dumps(header, sort_keys=True).encode("utf-8") + b"\n")
            for p in self.params_:
                fh.write(np.ascontiguousarray(p, dtype="<f8").tobytes())

    @classmethod
    def load(cls, path: str | Path) -> "MLPRegressor":
        with open(path, "rb") as fh:
            header = json.loads(fh.readline().decode("utf-8"))
            if header.get("format") != FORMAT:
                raise ValueError(f"{path}: not a regressor weights file")
            if header.get("version") != VERSION:
                raise ValueError(f"{path}: unsupported weights version {header.get('version')}")
            hp = dict(header["hyperparameters"])
            hp["hidden"] = tuple(hp["hidden"])
            model = cls(**hp)
            params = []
            for shape in header["shapes"]:
                count = int(np.prod(shape))
                buf = fh.read(8 * count)
                if len(buf) != 8 * count:
                    raise ValueError(f"{path}: truncated weights")
                params.append(np.frombuffer(buf, dtype="<f8").reshape(shape).copy())
            if fh.read(1):
                raise ValueError(f"{path}: trailing bytes after weights")
        model.params_ = params
        model.n_features_in_ = header["n_features_in"]
        model.loss_curve_ = header.get("loss_curve", [])
        model.header_ = header
        return model


def gradient_check(seed: int = 0, n: int = 8, hidden=(5, 4), h: float = 1e-6) -> float:
    """Largest relative error between analytic and central-difference gradients."""
    rng = np.random.default_rng(seed)
    est = MLPRegressor(hidden=hidden)
    params = est._init(3, rng)
    for p in params:
        p += rng.normal(0, 0.1, size=p.shape)  # non-zero biases exercise every path
    X = rng.uniform(-1, 1, size=(n, 3))
    y = rng.uniform(0, 1, size=n)
    _, grads = MLPRegressor.loss_and_grads(params, X, y)
    worst = 0.0
    for p, g in zip(params, grads):
        for idx in np.ndindex(p.shape):
            old = p[idx]
            p[idx] = old + h
            up, _ = MLPRegressor.loss_and_grads(params, X, y)
            p[idx] = old - h
            down, _ = MLPRegressor.loss_and_grads(params, X, y)
            p[idx] = old
            num = (up - down) / (2 * h)
            denom = max(abs(num), abs(g[idx]), 1e-8)
            worst = max(worst, abs(num - g[idx]) / denom)
    return worst
