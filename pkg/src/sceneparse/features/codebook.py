"""Visual-word codebooks learnt by k-means."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans

from ..exceptions import InsufficientDataError, InvalidInputError, MissingArtifactError
from .descriptors import filter_bank_responses, gradient_descriptors, grid_positions

KINDS = ("texton", "descriptor")


@dataclass(frozen=True, eq=False)
class Codebook:
    kind: str
    centers: np.ndarray

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidInputError(f"unknown codebook kind {self.kind!r}")
        if not np.all(np.isfinite(self.centers)):
            raise InvalidInputError("codebook centers must be finite")

    @property
    def size(self) -> int:
        return len(self.centers)

    def quantize(self, descriptors) -> np.ndarray:
        """Index of the nearest center for each row (lowest index on ties)."""
        x = np.asarray(descriptors, dtype=np.float64)
        shape = x.shape[:-1]
        x = x.reshape(-1, x.shape[-1])
        c = self.centers
        d2 = (x * x).sum(1)[:, None] - 2.0 * x @ c.T + (c * c).sum(1)[None, :]
        return np.argmin(d2, axis=1).reshape(shape)

    def describe(self, image) -> np.ndarray:
        """Per-pixel descriptor map matching this codebook's kind."""
        if self.kind == "texton":
            return filter_bank_responses(image)
        return gradient_descriptors(image)

    def word_map(self, image) -> np.ndarray:
        return self.quantize(self.describe(image))

    def save(self, path) -> None:
        np.savetxt(path, self.centers, delimiter=",", fmt="%.17g")

    @classmethod
    def load(cls, path, kind) -> "Codebook":
        if not os.path.exists(path):
            raise MissingArtifactError(f"codebook not found: {path}")
        return cls(kind, np.loadtxt(path, delimiter=",", ndmin=2))


def fit_codebook(descriptors, kind, n_words=100, seed=42, max_iter=100, tol=1e-6) -> Codebook:
    """Cluster ``descriptors`` into ``n_words`` centers (k-means++ seeding)."""
    descriptors = np.asarray(descriptors, dtype=np.float64)
    if len(descriptors) < n_words:
        raise InsufficientDataError(
            f"{kind} codebook needs at least {n_words} descriptors, got {len(descriptors)}")
    km = KMeans(n_clusters=n_words, init="k-means++", n_init=1, max_iter=max_iter,
                tol=tol, random_state=seed, algorithm="lloyd")
    km.fit(descriptors)
    return Codebook(kind, km.cluster_centers_)


def sample_descriptors(kind, images, sample_budget, seed=42, stride=8) -> np.ndarray:
    """Draw at most ``sample_budget`` training descriptors from ``images``.

    Filter-bank responses are sampled at random pixels; gradient descriptors
    on a regular ``stride`` grid.
    """
    if kind not in KINDS:
        raise InvalidInputError(f"unknown codebook kind {kind!r}")
    rng = np.random.default_rng(seed)
    images = list(images)
    quota = -(-sample_budget // max(1, len(images)))
    pools = []
    for image in images:
        if kind == "texton":
            pool = filter_bank_responses(image).reshape(-1, 17)
        else:
            pool = gradient_descriptors(image, grid_positions(np.shape(image), stride))
        if len(pool) > quota:
            pool = pool[np.sort(rng.choice(len(pool), size=quota, replace=False))]
        pools.append(pool)
    pool = np.concatenate(pools) if pools else np.empty((0, 0))
    if len(pool) > sample_budget:
        pool = pool[np.sort(rng.choice(len(pool), size=sample_budget, replace=False))]
    return pool


def build_codebook(kind, training_images, sample_budget=20000, seed=42, n_words=100) -> Codebook:
    pool = sample_descriptors(kind, training_images, sample_budget, seed)
    return fit_codebook(pool, kind, n_words=n_words, seed=seed)
