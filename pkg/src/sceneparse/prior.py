"""Spatially constrained co-occurrence priors learnt from labelled data.

The global prior conditions on a block pair: given ``c_hat`` somewhere in
block ``k1``, it is the distribution of classes found in block ``k2`` of the
same image.  The local prior ignores blocks and conditions on superpixel
adjacency instead.  Counts are kept as integers so that duplicating a
corpus scales them exactly.
"""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientDataError, InvalidInputError, MissingArtifactError

VOID = -1


@dataclass(frozen=True)
class BlockGrid:
    """``blocks_x * blocks_y`` near-equal cells tiling a ``width x height`` image."""

    width: int
    height: int
    blocks_x: int = 6
    blocks_y: int = 6

    def __post_init__(self):
        if self.blocks_x * self.blocks_y < 2:
            raise InvalidInputError("a block grid needs at least 2 blocks")
        if self.width < self.blocks_x or self.height < self.blocks_y:
            raise InvalidInputError(
                f"{self.width}x{self.height} image is too small for a "
                f"{self.blocks_x}x{self.blocks_y} grid")

    @property
    def n_blocks(self) -> int:
        return self.blocks_x * self.blocks_y

    @property
    def x_edges(self) -> np.ndarray:
        return (np.arange(self.blocks_x + 1) * self.width) // self.blocks_x

    @property
    def y_edges(self) -> np.ndarray:
        return (np.arange(self.blocks_y + 1) * self.height) // self.blocks_y

    def block_of(self, centroids) -> np.ndarray:
        """Vectorized :func:`assign_block` over ``(N, 2)`` ``(x, y)`` centroids."""
        c = np.asarray(centroids, dtype=np.float64).reshape(-1, 2)
        x, y = c[:, 0], c[:, 1]
        if np.any((x < 0) | (x >= self.width) | (y < 0) | (y >= self.height)):
            raise InvalidInputError("centroid outside the image")
        col = np.searchsorted(self.x_edges, x, side="right") - 1
        row = np.searchsorted(self.y_edges, y, side="right") - 1
        return row * self.blocks_x + col

    def block_map(self) -> np.ndarray:
        """Block id of every pixel."""
        rows, cols = np.indices((self.height, self.width))
        col = np.searchsorted(self.x_edges, cols, side="right") - 1
        row = np.searchsorted(self.y_edges, rows, side="right") - 1
        return row * self.blocks_x + col


def assign_block(centroid, grid: BlockGrid) -> int:
    """Block containing ``centroid = (x, y)``; boundary points go to the higher cell."""
    return int(grid.block_of(centroid)[0])


def majority_label(pixel_labels) -> int:
    """Most frequent non-void label (lowest id on ties), or ``VOID``."""
    labels = np.asarray(pixel_labels).ravel()
    labels = labels[labels != VOID]
    if labels.size == 0:
        return VOID
    return int(np.argmax(np.bincount(labels)))


def superpixel_labels(spmap, label_map, n_classes) -> np.ndarray:
    """:func:`majority_label` for every superpixel of ``spmap`` at once."""
    label_map = np.asarray(label_map)
    if label_map.shape != spmap.ids.shape:
        raise InvalidInputError(
            f"label map shape {label_map.shape} does not match superpixels {spmap.ids.shape}")
    ids = spmap.ids.ravel()
    labels = label_map.ravel()
    keep = labels != VOID
    counts = np.bincount(ids[keep] * n_classes + labels[keep],
                         minlength=spmap.n_segments * n_classes).reshape(spmap.n_segments, n_classes)
    out = np.argmax(counts, axis=1)
    out[counts.sum(axis=1) == 0] = VOID
    return out


def block_class_tally(blocks, labels, pixel_counts, n_blocks, n_classes) -> np.ndarray:
    """``(K, M)`` pixel tally per block and class, each superpixel in its centroid block."""
    blocks = np.asarray(blocks, dtype=np.int64)
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.asarray(pixel_counts, dtype=np.int64)
    keep = labels != VOID
    tally = np.zeros((n_blocks, n_classes), dtype=np.int64)
    np.add.at(tally, (blocks[keep], labels[keep]), counts[keep])
    return tally


@dataclass(frozen=True, eq=False)
class GlobalPrior:
    """``values[c_hat, c, k1, k2]``; entries with ``k1 == k2`` are unused and zero."""

    values: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.values.shape[0]

    @property
    def n_blocks(self) -> int:
        return self.values.shape[2]

    def save(self, path) -> None:
        m, k = self.n_classes, self.n_blocks
        uniform = 1.0 / m
        with open(path, "w") as fh:
            fh.write(f"{m} {k}\n")
            for a in range(m):
                for k1 in range(k):
                    for k2 in range(k):
                        if k1 == k2:
                            continue
                        col = self.values[a, :, k1, k2]
                        if np.all(col == uniform):
                            continue
                        for c in np.nonzero(col)[0]:
                            fh.write(f"{a} {c} {k1} {k2} {float(col[c])!r}\n")

    @classmethod
    def load(cls, path) -> "GlobalPrior":
        if not os.path.exists(path):
            raise MissingArtifactError(f"global prior not found: {path}")
        with open(path) as fh:
            m, k = (int(v) for v in fh.readline().split())
            values = np.zeros((m, m, k, k))
            seen = np.zeros((m, k, k), dtype=bool)
            for lineno, line in enumerate(fh, start=2):
                parts = line.split()
                if not parts:
                    continue
                if len(parts) != 5:
                    raise InvalidInputError(f"{path}:{lineno}: expected 'c_hat c k1 k2 value'")
                a, c, k1, k2 = (int(v) for v in parts[:4])
                values[a, c, k1, k2] = float(parts[4])
                seen[a, k1, k2] = True
        off_diag = ~np.eye(k, dtype=bool)
        fill = (~seen) & off_diag[None]
        values.transpose(0, 2, 3, 1)[fill] = 1.0 / m
        return cls(values)


@dataclass(frozen=True, eq=False)
class LocalPrior:
    """``values[c_hat, c]``: class of a neighbour given a superpixel's class."""

    values: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.values.shape[0]

    def save(self, path) -> None:
        np.savetxt(path, self.values, delimiter=",", fmt="%.17g")

    @classmethod
    def load(cls, path) -> "LocalPrior":
        if not os.path.exists(path):
            raise MissingArtifactError(f"local prior not found: {path}")
        return cls(np.loadtxt(path, delimiter=",", ndmin=2))


def _normalize(counts, axis, alpha):
    counts = counts.astype(np.float64) + alpha
    total = counts.sum(axis=axis, keepdims=True)
    m = counts.shape[axis]
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(total > 0, counts / np.where(total > 0, total, 1.0), 1.0 / m)
    return out


def global_prior_counts(images, n_blocks, n_classes) -> np.ndarray:
    """Integer pixel-pair counts ``[c_hat, c, k1, k2]`` summed over images.

    ``images`` yields ``(blocks, labels, pixel_counts)`` per training image,
    one entry per superpixel.
    """
    counts = np.zeros((n_classes, n_classes, n_blocks, n_blocks), dtype=np.int64)
    for blocks, labels, pixel_counts in images:
        tally = block_class_tally(blocks, labels, pixel_counts, n_blocks, n_classes)
        counts += np.einsum("ia,jc->acij", tally, tally)
    counts[:, :, np.arange(n_blocks), np.arange(n_blocks)] = 0
    return counts


def build_global_prior(images, n_blocks, n_classes, alpha=0.0) -> GlobalPrior:
    """Normalize :func:`global_prior_counts` over the class in ``k2``.

    ``alpha`` pixel-pairs of additive smoothing are added to every cell;
    triples with no mass at all get the uniform distribution.
    """
    counts = global_prior_counts(images, n_blocks, n_classes)
    if counts.sum() == 0:
        raise InsufficientDataError("global prior: no labelled superpixels in two distinct blocks")
    values = _normalize(counts, axis=1, alpha=alpha)
    values[:, :, np.arange(n_blocks), np.arange(n_blocks)] = 0.0
    return GlobalPrior(values)


def adjacency_label_pairs(spmap, sp_labels) -> np.ndarray:
    """Ordered ``(c_hat, c)`` label pairs of adjacent, non-void superpixels."""
    sp_labels = np.asarray(sp_labels)
    pairs = spmap.adjacency_pairs()
    if len(pairs) == 0:
        return np.empty((0, 2), dtype=np.int64)
    lab = sp_labels[pairs]
    return lab[(lab != VOID).all(axis=1)]


def build_local_prior(label_pairs, n_classes, alpha=0.0) -> LocalPrior:
    """Row-normalized adjacency counts; rows without support are uniform."""
    pairs = np.asarray(label_pairs, dtype=np.int64).reshape(-1, 2)
    pairs = pairs[(pairs != VOID).all(axis=1)]
    if len(pairs) == 0:
        raise InsufficientDataError("local prior: no labelled adjacency pairs")
    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (pairs[:, 0], pairs[:, 1]), 1)
    return LocalPrior(_normalize(counts, axis=1, alpha=alpha))
