"""One-vs-all probabilistic classifiers on class-specific feature subsets.

Each class gets an L2-regularized logistic regression trained by
full-batch gradient descent on standardized features.  Classes with no
positive training example degrade to a constant predictor.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidInputError, MissingArtifactError

logger = logging.getLogger(__name__)


def logistic_loss_grad(weights, bias, X, y, alpha):
    """Mean log-loss plus ``alpha / 2 * ||weights||^2`` and its gradient.

    Returns ``(loss, grad_weights, grad_bias)``.
    """
    z = X @ weights + bias
    loss = np.mean(np.logaddexp(0.0, z) - y * z) + 0.5 * alpha * weights @ weights
    residual = (expit(z) - y) / len(y)
    return loss, X.T @ residual + alpha * weights, residual.sum()


def fit_logistic(X, y, alpha=1e-3, max_iter=5000, tol=1e-6):
    """Gradient descent with step ``1 / L`` from a zero start.

    Stops when the full gradient norm drops below ``tol``.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    n, d = X.shape
    # Lipschitz bound of the log-loss gradient on the augmented design [X, 1]
    spectral = np.linalg.norm(np.column_stack([X, np.ones(n)]), ord=2) ** 2 if n else 0.0
    step = 1.0 / (0.25 * spectral / max(n, 1) + alpha)
    w = np.zeros(d)
    b = 0.0
    for _ in range(max_iter):
        _, gw, gb = logistic_loss_grad(w, b, X, y, alpha)
        if np.sqrt(gw @ gw + gb * gb) < tol:
            break
        w = w - step * gw
        b = b - step * gb
    return w, b


@dataclass(frozen=True, eq=False)
class BinaryClassModel:
    """Logistic scorer for one class over its selected feature columns.

    When ``constant`` is set the model ignores its input and returns that
    probability.
    """

    class_id: int
    features: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    weights: np.ndarray
    bias: float
    alpha: float = 1e-3
    seed: int = 42
    constant: float | None = None

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        z = (X[:, self.features] - self.mean) / self.std
        return z @ self.weights + self.bias

    def predict_proba(self, X) -> np.ndarray:
        if self.constant is not None:
            return np.full(len(X), self.constant)
        return expit(self.decision_function(X))

    def save(self, path) -> None:
        fmt = lambda arr: " ".join(repr(float(v)) for v in arr)
        with open(path, "w") as fh:
            fh.write(f"{self.class_id} {self.alpha!r} {self.seed}\n")
            fh.write(" ".join(str(int(i)) for i in self.features) + "\n")
            fh.write(fmt(self.mean) + "\n")
            fh.write(fmt(self.std) + "\n")
            fh.write(fmt(self.weights) + "\n")
            fh.write(f"{float(self.bias)!r}\n")
            fh.write("constant " + ("none" if self.constant is None else repr(self.constant)) + "\n")

    @classmethod
    def load(cls, path) -> "BinaryClassModel":
        if not os.path.exists(path):
            raise MissingArtifactError(f"classifier not found: {path}")
        with open(path) as fh:
            lines = fh.read().split("\n")
        if len(lines) < 7:
            raise InvalidInputError(f"{path}: truncated classifier file")
        class_id, alpha, seed = lines[0].split()
        floats = lambda s: np.asarray([float(t) for t in s.split()], dtype=np.float64)
        const = lines[6].split()[1]
        return cls(
            class_id=int(class_id),
            features=np.asarray([int(t) for t in lines[1].split()], dtype=np.int64),
            mean=floats(lines[2]),
            std=floats(lines[3]),
            weights=floats(lines[4]),
            bias=float(lines[5]),
            alpha=float(alpha),
            seed=int(seed),
            constant=None if const == "none" else float(const),
        )


def train_binary(X, y, class_id, features, alpha=1e-3, max_iter=5000, tol=1e-6, seed=42):
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    features = np.asarray(features, dtype=np.int64)
    sub = X[:, features]
    mean = sub.mean(axis=0)
    std = sub.std(axis=0)
    std[std == 0] = 1.0
    if y.sum() == 0:
        logger.warning("class %d has no positive training superpixels; using a constant model",
                       class_id)
        return BinaryClassModel(class_id, features, mean, std, np.zeros(len(features)), 0.0,
                                alpha, seed, constant=0.0)
    w, b = fit_logistic((sub - mean) / std, y, alpha, max_iter, tol)
    return BinaryClassModel(class_id, features, mean, std, w, float(b), alpha, seed)


def train_one_vs_all(features, labels, selected, n_classes, alpha=1e-3, max_iter=5000,
                     tol=1e-6, seed=42):
    """Fit one :class:`BinaryClassModel` per class id ``0..n_classes-1``.

    ``selected`` maps class id to its feature indices; classes missing from
    it use every column.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels)
    all_columns = np.arange(features.shape[1])
    return [
        train_binary(features, labels == c, c, selected.get(c, all_columns) if selected else all_columns,
                     alpha, max_iter, tol, seed)
        for c in range(n_classes)
    ]


def predict_proba(models, features, n_features=None) -> np.ndarray:
    """Independent per-class probabilities, shape ``(n, n_classes)``.

    A single 1-D feature row yields a 1-D vector.  ``n_features``, when
    given, is the row length the models were trained on.
    """
    features = np.asarray(features, dtype=np.float64)
    single = features.ndim == 1
    X = np.atleast_2d(features)
    needed = max((int(m.features.max()) + 1 for m in models if len(m.features)), default=0)
    if (n_features is not None and X.shape[1] != n_features) or X.shape[1] < needed:
        raise InvalidInputError(f"feature rows have {X.shape[1]} columns")
    P = np.column_stack([m.predict_proba(X) for m in models])
    return P[0] if single else P


def most_probable_class(p):
    """``(index, probability)`` of the largest entry; ties go to the lowest index."""
    p = np.asarray(p, dtype=np.float64).ravel()
    if p.size == 0:
        raise InvalidInputError("empty probability vector")
    i = int(np.argmax(p))
    return i, float(p[i])


class OneVsAllClassifier(ClassifierMixin, BaseEstimator):
    """Estimator front-end for :func:`train_one_vs_all`.

    Parameters
    ----------
    n_classes : int
        Class ids are ``0..n_classes-1``; ids absent from ``y`` get a
        constant zero-probability model.
    feature_subsets : dict, optional
        Class id to feature column indices.
    alpha : float, default 1e-3
        L2 penalty on the weights.
    """

    def __init__(self, n_classes, feature_subsets=None, alpha=1e-3, max_iter=5000, tol=1e-6,
                 seed=42):
        self.n_classes = n_classes
        self.feature_subsets = feature_subsets
        self.alpha = alpha
        self.max_iter = max_iter
        self.tol = tol
        self.seed = seed

    def fit(self, X, y):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.arange(self.n_classes)
        self.models_ = train_one_vs_all(X, y, self.feature_subsets, self.n_classes, self.alpha,
                                        self.max_iter, self.tol, self.seed)
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "models_")
        return predict_proba(self.models_, check_array(X), self.n_features_in_)

    def predict(self, X):
        return np.argmax(self.predict_proba(X), axis=1)

    def save(self, directory) -> None:
        check_is_fitted(self, "models_")
        os.makedirs(directory, exist_ok=True)
        for m in self.models_:
            m.save(os.path.join(directory, f"class_{m.class_id:03d}.txt"))

    @classmethod
    def load(cls, directory, n_classes, n_features) -> "OneVsAllClassifier":
        models = [BinaryClassModel.load(os.path.join(directory, f"class_{c:03d}.txt"))
                  for c in range(n_classes)]
        first = models[0]
        obj = cls(n_classes, {m.class_id: m.features for m in models}, first.alpha, seed=first.seed)
        obj.models_ = models
        obj.n_features_in_ = n_features
        obj.classes_ = np.arange(n_classes)
        return obj
