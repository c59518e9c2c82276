"""Three-state discretization and class-specific mRMR feature selection."""
from __future__ import annotations

import logging
import os

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from ..exceptions import InvalidInputError, MissingArtifactError

logger = logging.getLogger(__name__)

STATES = (-2, 0, 2)
# scores closer than this are treated as tied and resolved by lowest index
TIE_TOL = 1e-12


def discretize(matrix, thresholds=None):
    """Map each column to {-2, 0, 2} around its mean +/- one sample std.

    Returns ``(states, (means, stds))``.  Pass ``thresholds`` to reuse the
    statistics of a previous call on new data.
    """
    x = np.asarray(matrix, dtype=np.float64)
    if x.ndim != 2:
        raise InvalidInputError(f"expected a 2-D matrix, got shape {x.shape}")
    if thresholds is None:
        if len(x) < 2:
            raise InvalidInputError("discretization needs at least 2 samples")
        mean = x.mean(axis=0)
        std = x.std(axis=0, ddof=1)
    else:
        mean, std = (np.asarray(t, dtype=np.float64) for t in thresholds)
        if mean.shape != (x.shape[1],):
            raise InvalidInputError(f"thresholds cover {mean.shape[0]} columns, data has {x.shape[1]}")
    states = np.zeros(x.shape, dtype=np.int8)
    states[x < mean - std] = -2
    states[x > mean + std] = 2
    states[:, std == 0] = 0
    return states, (mean, std)


class Discretizer(TransformerMixin, BaseEstimator):
    """Estimator wrapper around :func:`discretize`."""

    def fit(self, X, y=None):
        X = check_array(X)
        _, (self.mean_, self.std_) = discretize(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        return discretize(check_array(X), (self.mean_, self.std_))[0]

    def save(self, path) -> None:
        check_is_fitted(self, "mean_")
        np.savetxt(path, np.stack([self.mean_, self.std_], axis=1), delimiter=",",
                   fmt="%.17g", header="mean,std", comments="")

    @classmethod
    def load(cls, path) -> "Discretizer":
        if not os.path.exists(path):
            raise MissingArtifactError(f"thresholds not found: {path}")
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        obj = cls()
        obj.mean_, obj.std_ = data[:, 0].copy(), data[:, 1].copy()
        obj.n_features_in_ = len(data)
        return obj


def _codes(x):
    _, inverse = np.unique(np.asarray(x), return_inverse=True)
    return inverse.ravel(), int(inverse.max()) + 1 if inverse.size else 0


def mutual_information(x, y) -> float:
    """Plug-in mutual information (bits) of two discrete sequences."""
    x, y = np.asarray(x).ravel(), np.asarray(y).ravel()
    if len(x) != len(y) or len(x) == 0:
        raise InvalidInputError("mutual_information needs two non-empty sequences of equal length")
    cx, nx = _codes(x)
    cy, ny = _codes(y)
    joint = np.bincount(cx * ny + cy, minlength=nx * ny).reshape(nx, ny) / len(x)
    px = joint.sum(axis=1, keepdims=True)
    py = joint.sum(axis=0, keepdims=True)
    nz = joint > 0
    mi = float(np.sum(joint[nz] * np.log2(joint[nz] / (px @ py)[nz])))
    return max(mi, 0.0)


def _column_codes(states):
    """Re-code each column of a {-2, 0, 2} matrix to {0, 1, 2}."""
    return ((np.asarray(states, dtype=np.int64) + 2) // 2)


def _mi_against(codes, target, n_states_x=3):
    """MI between every column of ``codes`` and the coded vector ``target``."""
    n = len(codes)
    t_codes, nt = _codes(target)
    onehot_x = [(codes == a) for a in range(n_states_x)]
    onehot_t = [(t_codes == b) for b in range(nt)]
    px = np.stack([m.sum(axis=0) for m in onehot_x]) / n
    pt = np.array([m.sum() for m in onehot_t]) / n
    mi = np.zeros(codes.shape[1])
    for a in range(n_states_x):
        for b in range(nt):
            pab = (onehot_x[a] & onehot_t[b][:, None]).sum(axis=0) / n
            nz = pab > 0
            mi[nz] += pab[nz] * np.log2(pab[nz] / (px[a, nz] * pt[b]))
    return np.maximum(mi, 0.0)


def _argmax_lowest(scores, candidates):
    best = scores[candidates].max()
    return int(candidates[np.nonzero(scores[candidates] >= best - TIE_TOL)[0][0]])


def mrmr_select(states, target, count=50) -> np.ndarray:
    """Greedy mutual-information-difference mRMR.

    The first pick maximises relevance ``I(f; target)``; each later pick
    maximises relevance minus mean redundancy with the picks so far.  Stops
    early, with fewer than ``count`` (but at least one) indices, once every
    remaining feature has zero relevance.
    """
    states = np.asarray(states)
    if states.ndim != 2 or states.shape[1] == 0 or states.shape[0] == 0:
        raise InvalidInputError("mrmr_select needs a non-empty 2-D state matrix")
    target = np.asarray(target).ravel()
    if len(target) != len(states):
        raise InvalidInputError(f"{len(states)} samples but {len(target)} targets")
    codes = _column_codes(states)
    relevance = _mi_against(codes, target)
    redundancy = np.zeros(codes.shape[1])
    remaining = np.arange(codes.shape[1])
    selected = []
    while len(selected) < count and len(remaining):
        if selected and relevance[remaining].max() <= TIE_TOL:
            logger.info("mRMR stopped after %d features: no relevant features left", len(selected))
            break
        if selected:
            score = relevance - redundancy / len(selected)
        else:
            score = relevance
        pick = _argmax_lowest(score, remaining)
        selected.append(pick)
        remaining = remaining[remaining != pick]
        if len(selected) < count and len(remaining):
            redundancy += _mi_against(codes, codes[:, pick])
    return np.asarray(selected, dtype=np.int64)


class ClassSpecificMRMR(BaseEstimator):
    """One-vs-all mRMR: an index subset per class.

    Parameters
    ----------
    n_classes : int
    n_selected : int, default 50
    """

    def __init__(self, n_classes, n_selected=50):
        self.n_classes = n_classes
        self.n_selected = n_selected

    def fit(self, X_states, y):
        X_states = np.asarray(X_states)
        y = np.asarray(y)
        self.selected_ = {
            c: mrmr_select(X_states, (y == c).astype(np.int64), self.n_selected)
            for c in range(self.n_classes)
        }
        return self


def write_selected_features(path, selected) -> None:
    with open(path, "w") as fh:
        for c in sorted(selected):
            fh.write(f"{c}: " + " ".join(str(int(i)) for i in selected[c]) + "\n")


def read_selected_features(path) -> dict:
    if not os.path.exists(path):
        raise MissingArtifactError(f"selected feature sets not found: {path}")
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            head, sep, rest = line.partition(":")
            if not sep:
                raise InvalidInputError(f"{path}:{lineno}: expected 'class_id: indices'")
            out[int(head)] = np.asarray([int(t) for t in rest.split()], dtype=np.int64)
    return out
