"""Contextual class votes and their fusion with visual probabilities.

Every superpixel votes with weight ``confidence * pixel_count``, where
``confidence`` is the visual probability of its own most probable class.
Global votes go to superpixels in other blocks through the global prior;
local votes go to adjacent superpixels through the local prior.
"""
from __future__ import annotations

import logging
import os
from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDataError, InvalidInputError, InvalidModelError, MissingArtifactError

logger = logging.getLogger(__name__)

WEIGHTINGS = ("voter", "literal")


def _check_global(prior, n_classes=None):
    values = prior.values
    if values.ndim != 4 or values.shape[0] != values.shape[1] or values.shape[2] != values.shape[3]:
        raise InvalidInputError(f"global prior has malformed shape {values.shape}")
    if n_classes is not None and values.shape[0] != n_classes:
        raise InvalidInputError(f"global prior covers {values.shape[0]} classes, expected {n_classes}")
    return values


def _voter_arrays(blocks, classes, confidence, counts, n_blocks, n_classes):
    blocks = np.asarray(blocks, dtype=np.int64)
    classes = np.asarray(classes, dtype=np.int64)
    confidence = np.asarray(confidence, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    if not (len(blocks) == len(classes) == len(confidence) == len(counts)):
        raise InvalidInputError("voter arrays must have equal length")
    if len(blocks) and (blocks.min() < 0 or blocks.max() >= n_blocks):
        raise InvalidInputError(f"voter block ids must lie in [0, {n_blocks})")
    if len(classes) and (classes.min() < 0 or classes.max() >= n_classes):
        raise InvalidInputError(f"voter classes must lie in [0, {n_classes})")
    return blocks, classes, confidence, counts


def global_votes(target_block, voter_blocks, voter_classes, voter_confidence, voter_counts,
                 prior, target_confidence=None, weighting="voter") -> np.ndarray:
    """Global vote vector for one superpixel sitting in ``target_block``.

    Sums ``w_q * prior[c_hat_q, :, k1_q, target_block]`` over voters in any
    other block.  With ``weighting="literal"`` the weight is
    ``target_confidence * count_q`` instead of ``confidence_q * count_q``.
    """
    values = _check_global(prior)
    m, k = values.shape[0], values.shape[2]
    blocks, classes, conf, counts = _voter_arrays(
        voter_blocks, voter_classes, voter_confidence, voter_counts, k, m)
    if not 0 <= target_block < k:
        raise InvalidInputError(f"target block {target_block} outside [0, {k})")
    w = _weights(conf, counts, target_confidence, weighting)
    out = blocks != target_block
    return w[out] @ values[classes[out], :, blocks[out], target_block] if out.any() else np.zeros(m)


def _weights(conf, counts, target_confidence, weighting):
    if weighting == "voter":
        return conf * counts
    if weighting == "literal":
        if target_confidence is None:
            raise InvalidInputError("literal weighting needs the target's confidence")
        return float(target_confidence) * counts
    raise InvalidInputError(f"unknown weighting {weighting!r}; choose from {WEIGHTINGS}")


def global_votes_all(blocks, classes, confidence, counts, prior, weighting="voter") -> np.ndarray:
    """Global votes for every superpixel of an image, shape ``(N, M)``.

    Voter mass is first pooled into a ``(K, M)`` block-by-class table, so the
    cost is ``O(N + K^2 M^2)`` rather than quadratic in ``N``.
    """
    values = _check_global(prior)
    m, k = values.shape[0], values.shape[2]
    blocks, classes, conf, counts = _voter_arrays(blocks, classes, confidence, counts, k, m)
    table = np.zeros((k, m))
    np.add.at(table, (blocks, classes), counts if weighting == "literal" else conf * counts)
    if weighting not in WEIGHTINGS:
        raise InvalidInputError(f"unknown weighting {weighting!r}; choose from {WEIGHTINGS}")
    off = 1.0 - np.eye(k)
    # per_block[k2, c] = sum over k1 != k2 and c_hat of table[k1, c_hat] * prior[c_hat, c, k1, k2]
    per_block = np.einsum("ia,acij,ij->jc", table, values, off)
    votes = per_block[blocks]
    if weighting == "literal":
        votes = votes * conf[:, None]
    return votes


def local_votes(neighbor_classes, neighbor_confidence, neighbor_counts, prior,
                target_confidence=None, weighting="voter") -> np.ndarray:
    """Local vote vector from one superpixel's neighbours."""
    values = prior.values
    m = values.shape[0]
    classes = np.asarray(neighbor_classes, dtype=np.int64)
    conf = np.asarray(neighbor_confidence, dtype=np.float64)
    counts = np.asarray(neighbor_counts, dtype=np.float64)
    if len(classes) and (classes.min() < 0 or classes.max() >= m):
        raise InvalidInputError(f"neighbour classes must lie in [0, {m})")
    if len(classes) == 0:
        return np.zeros(m)
    return _weights(conf, counts, target_confidence, weighting) @ values[classes]


def local_votes_all(neighbors, classes, confidence, counts, prior, weighting="voter") -> np.ndarray:
    """Local votes for every superpixel; ``neighbors[j]`` lists j's neighbours."""
    classes = np.asarray(classes, dtype=np.int64)
    confidence = np.asarray(confidence, dtype=np.float64)
    counts = np.asarray(counts, dtype=np.float64)
    m = prior.values.shape[0]
    out = np.zeros((len(classes), m))
    for j, nbrs in enumerate(neighbors):
        nbrs = np.asarray(nbrs, dtype=np.int64)
        out[j] = local_votes(classes[nbrs], confidence[nbrs], counts[nbrs], prior,
                             confidence[j], weighting)
    return out


def normalize_votes(votes) -> np.ndarray:
    """Divide by the row sum; all-zero rows become uniform."""
    v = np.asarray(votes, dtype=np.float64)
    if np.any(v < 0):
        raise InvalidInputError("votes must be non-negative")
    total = v.sum(axis=-1, keepdims=True)
    m = v.shape[-1]
    return np.where(total > 0, v / np.where(total > 0, total, 1.0), 1.0 / m)


@dataclass(frozen=True, eq=False)
class FusionModel:
    """Per-class weights ``(w_const, w_visual, w_local, w_global)``, shape ``(M, 4)``."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.float64)
        if w.ndim != 2 or w.shape[1] != 4:
            raise InvalidModelError(f"fusion weights must have shape (M, 4), got {w.shape}")
        if np.any(w < 0):
            raise InvalidModelError("fusion weights must be non-negative")
        if np.any(w.sum(axis=1) <= 0):
            raise InvalidModelError("every class needs a positive fusion weight sum")

    @property
    def n_classes(self) -> int:
        return len(self.weights)

    @classmethod
    def visual_only(cls, n_classes) -> "FusionModel":
        return cls(np.tile([0.0, 1.0, 0.0, 0.0], (n_classes, 1)))

    def save(self, path) -> None:
        np.savetxt(path, self.weights, delimiter=",", fmt="%.17g", header="w_c,w_v,w_l,w_g",
                   comments="")

    @classmethod
    def load(cls, path) -> "FusionModel":
        if not os.path.exists(path):
            raise MissingArtifactError(f"fusion model not found: {path}")
        return cls(np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2))


def fuse(model: FusionModel, pv, pl, pg) -> np.ndarray:
    """Per-class normalized linear combination of the three probability sources."""
    w = np.asarray(model.weights, dtype=np.float64)
    pv, pl, pg = (np.asarray(p, dtype=np.float64) for p in (pv, pl, pg))
    if not pv.shape == pl.shape == pg.shape or pv.shape[-1] != len(w):
        raise InvalidInputError("probability arrays must share shape (..., M) with the model")
    total = w.sum(axis=1)
    if np.any(total <= 0):
        raise InvalidModelError("fusion weight sum must be positive for every class")
    return (w[:, 0] + w[:, 1] * pv + w[:, 2] * pl + w[:, 3] * pg) / total


def final_label(p):
    """Argmax over the last axis; ties resolve to the lowest class id."""
    p = np.asarray(p, dtype=np.float64)
    if p.size == 0 or p.shape[-1] == 0:
        raise InvalidInputError("empty probability vector")
    out = np.argmax(p, axis=-1)
    return int(out) if out.ndim == 0 else out


def _project_simplex(v):
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.nonzero(u - css / np.arange(1, len(v) + 1) > 0)[0][-1]
    return np.maximum(v - css[rho] / (rho + 1.0), 0.0)


def _fit_class(design, target, tol, max_iter):
    n = len(target)
    gram = design.T @ design / n
    rhs = design.T @ target / n
    lipschitz = 2.0 * np.linalg.eigvalsh(gram).max()
    step = 1.0 / lipschitz if lipschitz > 0 else 1.0
    w = np.full(4, 0.25)
    for _ in range(max_iter):
        grad = 2.0 * (gram @ w - rhs)
        nxt = _project_simplex(w - step * grad)
        if np.linalg.norm(nxt - w) / step < tol:
            return nxt
        w = nxt
    logger.debug("fusion fit hit %d iterations", max_iter)
    return w


def fusion_loss(weights, pv, pl, pg, target) -> float:
    """Mean squared error of one class's fused output against its 0/1 target."""
    w = np.asarray(weights, dtype=np.float64)
    out = (w[0] + w[1] * pv + w[2] * pl + w[3] * pg) / w.sum()
    return float(np.mean((out - target) ** 2))


def fit_fusion(pv, pl, pg, labels, n_classes, tol=1e-8, max_iter=200000) -> FusionModel:
    """Least-squares fusion weights under a non-negativity constraint.

    The model's output is invariant to rescaling a class's four weights, so
    each class is fitted on the probability simplex, where the normalized
    combination is plain linear regression, by projected gradient descent.
    """
    pv, pl, pg = (np.asarray(p, dtype=np.float64) for p in (pv, pl, pg))
    labels = np.asarray(labels)
    if pv.ndim != 2 or len(pv) == 0:
        raise InsufficientDataError("fusion needs at least one training triple")
    if not pv.shape == pl.shape == pg.shape or pv.shape[1] != n_classes or len(labels) != len(pv):
        raise InvalidInputError("fusion inputs must be aligned (n, M) arrays with n labels")
    weights = np.zeros((n_classes, 4))
    for c in range(n_classes):
        target = (labels == c).astype(np.float64)
        if target.sum() == 0:
            logger.warning("class %d has no positive fusion triples", c)
        design = np.column_stack([np.ones(len(pv)), pv[:, c], pl[:, c], pg[:, c]])
        w = _fit_class(design, target, tol, max_iter)
        weights[c] = w if w.sum() > 0 else (0.0, 1.0, 0.0, 0.0)
    return FusionModel(weights)
