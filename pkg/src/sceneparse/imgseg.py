"""Graph-based oversegmentation into superpixels.

The segmenter follows Felzenszwalb and Huttenlocher's greedy merging on an
8-connected pixel grid.  Components are grown along edges in ascending
weight order while the edge weight stays below both components' internal
variation plus ``k / |C|``.  A second pass over 4-connected edges absorbs
regions smaller than ``min_size`` so that every output superpixel is
4-connected.
"""
from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components

from .exceptions import InvalidInputError, MissingArtifactError

__all__ = [
    "SegParams",
    "SuperpixelMap",
    "compute_k",
    "gaussian_smooth",
    "segment",
    "superpixel_stats",
    "read_superpixel_map",
    "write_superpixel_map",
]


def compute_k(longer_dimension, base=200.0, reference=640.0) -> float:
    """Merge threshold scale for an image whose longer side is ``longer_dimension``.

    ``base * max(1, sqrt(longer_dimension / reference))``.
    """
    if longer_dimension < 1:
        raise InvalidInputError(f"longer_dimension must be >= 1, got {longer_dimension}")
    return base * max(1.0, math.sqrt(longer_dimension / reference))


@dataclass(frozen=True)
class SegParams:
    sigma: float = 0.8
    k: float = 200.0
    min_size: int = 100

    def __post_init__(self):
        if self.sigma < 0:
            raise InvalidInputError(f"sigma must be >= 0, got {self.sigma}")
        if self.k <= 0:
            raise InvalidInputError(f"k must be > 0, got {self.k}")
        if self.min_size < 1:
            raise InvalidInputError(f"min_size must be >= 1, got {self.min_size}")

    @classmethod
    def for_image(cls, image, sigma=0.8, min_size=100, k_base=200.0, k_reference=640.0):
        """Parameters with ``k`` derived from the image's longer side."""
        h, w = np.shape(image)[:2]
        return cls(sigma=sigma, k=compute_k(max(h, w), k_base, k_reference), min_size=min_size)


def _check_image(image) -> np.ndarray:
    image = np.asarray(image)
    if image.ndim == 2:
        image = image[:, :, None]
    if image.ndim != 3 or image.shape[0] < 1 or image.shape[1] < 1:
        raise InvalidInputError(f"expected a non-empty (H, W, C) image, got shape {image.shape}")
    return image


def _gaussian_kernel(sigma: float) -> np.ndarray:
    radius = int(math.ceil(4.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    kernel = np.exp(-(x * x) / (2.0 * sigma * sigma))
    return kernel / kernel.sum()


def _convolve_axis(data: np.ndarray, kernel: np.ndarray, axis: int) -> np.ndarray:
    radius = len(kernel) // 2
    pad = [(0, 0)] * data.ndim
    pad[axis] = (radius, radius)
    padded = np.pad(data, pad, mode="symmetric")
    out = np.zeros_like(data, dtype=np.float64)
    n = data.shape[axis]
    for offset, weight in enumerate(kernel):
        out += weight * np.take(padded, np.arange(offset, offset + n), axis=axis)
    return out


def gaussian_smooth(image, sigma: float) -> np.ndarray:
    """Separable per-channel Gaussian blur with mirrored borders.

    The kernel is truncated at ``ceil(4 * sigma)`` and renormalized.  With
    ``sigma == 0`` the input is returned unchanged.
    """
    if sigma < 0:
        raise InvalidInputError(f"sigma must be >= 0, got {sigma}")
    image = np.asarray(image)
    if sigma == 0:
        return image
    kernel = _gaussian_kernel(sigma)
    data = image.astype(np.float64)
    return _convolve_axis(_convolve_axis(data, kernel, 1), kernel, 0)


@dataclass(frozen=True, eq=False)
class SuperpixelMap:
    """Per-pixel superpixel ids together with per-superpixel statistics.

    ``centroids`` are ``(x, y)`` pairs in pixel coordinates, ``bboxes`` are
    inclusive ``(top, left, bottom, right)`` rows, and ``neighbors[j]`` is
    the sorted array of superpixels 4-adjacent to ``j``.
    """

    ids: np.ndarray
    n_segments: int
    counts: np.ndarray
    centroids: np.ndarray
    bboxes: np.ndarray
    neighbors: tuple = field(repr=False)

    @classmethod
    def from_ids(cls, ids) -> "SuperpixelMap":
        ids = np.asarray(ids, dtype=np.int64)
        if ids.ndim != 2 or ids.size == 0:
            raise InvalidInputError(f"superpixel ids must be a non-empty 2-D grid, got {ids.shape}")
        n = int(ids.max()) + 1
        if ids.min() < 0 or np.unique(ids).size != n:
            raise InvalidInputError("superpixel ids must be contiguous 0..N-1 with no empty id")
        ids.setflags(write=False)
        return cls(ids, n, *superpixel_stats(ids))

    @property
    def width(self) -> int:
        return self.ids.shape[1]

    @property
    def height(self) -> int:
        return self.ids.shape[0]

    def adjacency_pairs(self) -> np.ndarray:
        """Ordered ``(j, p)`` pairs, each unordered adjacency listed both ways."""
        pairs = [(j, p) for j, nbrs in enumerate(self.neighbors) for p in nbrs]
        return np.asarray(pairs, dtype=np.int64).reshape(-1, 2)

    def pixel_indices(self):
        """Flat pixel indices of every superpixel, in raster order."""
        flat = self.ids.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.cumsum(self.counts)[:-1]
        return np.split(order, bounds)


def superpixel_stats(ids):
    """Counts, centroids, bounding boxes and 4-adjacency for an id grid.

    Returns ``(counts, centroids, bboxes, neighbors)``; see
    :class:`SuperpixelMap` for the layout of each.
    """
    ids = np.asarray(ids, dtype=np.int64)
    h, w = ids.shape
    n = int(ids.max()) + 1
    flat = ids.ravel()
    rows, cols = np.divmod(np.arange(h * w), w)
    counts = np.bincount(flat, minlength=n)
    cx = np.bincount(flat, weights=cols, minlength=n) / counts
    cy = np.bincount(flat, weights=rows, minlength=n) / counts
    centroids = np.stack([cx, cy], axis=1)

    bboxes = np.empty((n, 4), dtype=np.int64)
    bboxes[:, 0] = h
    bboxes[:, 1] = w
    bboxes[:, 2] = -1
    bboxes[:, 3] = -1
    np.minimum.at(bboxes[:, 0], flat, rows)
    np.minimum.at(bboxes[:, 1], flat, cols)
    np.maximum.at(bboxes[:, 2], flat, rows)
    np.maximum.at(bboxes[:, 3], flat, cols)

    a = np.concatenate([ids[:, :-1].ravel(), ids[:-1, :].ravel()])
    b = np.concatenate([ids[:, 1:].ravel(), ids[1:, :].ravel()])
    mask = a != b
    pairs = np.unique(np.stack([np.concatenate([a[mask], b[mask]]),
                                np.concatenate([b[mask], a[mask]])], axis=1), axis=0)
    neighbors = [np.empty(0, dtype=np.int64)] * n
    if len(pairs):
        starts = np.searchsorted(pairs[:, 0], np.arange(n + 1))
        neighbors = [pairs[starts[j]:starts[j + 1], 1] for j in range(n)]
    return counts, centroids, bboxes, tuple(neighbors)


def _grid_edges(h: int, w: int, offsets):
    index = np.arange(h * w).reshape(h, w)
    src, dst = [], []
    for dy, dx in offsets:
        y0, y1 = 0, h - dy
        x0, x1 = max(0, -dx), w - max(0, dx)
        src.append(index[y0:y1, x0:x1].ravel())
        dst.append(index[y0 + dy:y1 + dy, x0 + dx:x1 + dx].ravel())
    return np.concatenate(src), np.concatenate(dst)


_OFFSETS_8 = ((0, 1), (1, 0), (1, 1), (1, -1))
_OFFSETS_4 = ((0, 1), (1, 0))


def _find(parent, x):
    root = x
    while parent[root] != root:
        root = parent[root]
    while parent[x] != root:
        parent[x], x = root, parent[x]
    return root


def _merge_by_threshold(n, src, dst, weight, k):
    parent = list(range(n))
    size = [1] * n
    thresh = [k] * n
    for a, b, wt in zip(src, dst, weight):
        ra = _find(parent, a)
        rb = _find(parent, b)
        if ra == rb:
            continue
        if wt <= thresh[ra] and wt <= thresh[rb]:
            if size[ra] < size[rb]:
                ra, rb = rb, ra
            parent[rb] = ra
            size[ra] += size[rb]
            thresh[ra] = wt + k / size[ra]
    return [_find(parent, x) for x in range(n)]


def _merge_small(labels, sizes, src, dst, min_size):
    parent = list(range(len(sizes)))
    size = list(sizes)
    small = sum(1 for s in size if s < min_size)
    for a, b in zip(src, dst):
        if small == 0:
            break
        ra = _find(parent, labels[a])
        rb = _find(parent, labels[b])
        if ra == rb or (size[ra] >= min_size and size[rb] >= min_size):
            continue
        small -= (size[ra] < min_size) + (size[rb] < min_size)
        if size[ra] < size[rb]:
            ra, rb = rb, ra
        parent[rb] = ra
        size[ra] += size[rb]
        small += size[ra] < min_size
    return np.asarray([_find(parent, x) for x in range(len(sizes))], dtype=np.int64)


def _edge_weights(smooth, src, dst):
    diff = smooth[src] - smooth[dst]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _sorted_edges(smooth, h, w, offsets):
    src, dst = _grid_edges(h, w, offsets)
    weight = _edge_weights(smooth, src, dst)
    order = np.lexsort((dst, src, weight))
    return src[order], dst[order], weight[order]


def _contiguous(roots, h, w):
    _, first, inverse = np.unique(roots, return_index=True, return_inverse=True)
    rank = np.empty(len(first), dtype=np.int64)
    rank[np.argsort(first, kind="stable")] = np.arange(len(first))
    return rank[inverse].reshape(h, w)


def segment(image, params: SegParams | None = None) -> SuperpixelMap:
    """Oversegment ``image`` into superpixels.

    Parameters
    ----------
    image : array of shape (H, W, 3)
        RGB raster; any numeric dtype.
    params : SegParams, optional
        Defaults to ``SegParams.for_image(image)``.
    """
    image = _check_image(image)
    if params is None:
        params = SegParams.for_image(image)
    h, w = image.shape[:2]
    smooth = gaussian_smooth(image.astype(np.float64), params.sigma).reshape(h * w, -1)

    src, dst, weight = _sorted_edges(smooth, h, w, _OFFSETS_8)
    roots = _merge_by_threshold(h * w, src.tolist(), dst.tolist(), weight.tolist(), float(params.k))
    roots = np.asarray(roots, dtype=np.int64)

    # split 8-connected components into 4-connected pieces
    s4, d4, _ = _sorted_edges(smooth, h, w, _OFFSETS_4)
    same = roots[s4] == roots[d4]
    graph = coo_matrix((np.ones(same.sum()), (s4[same], d4[same])), shape=(h * w, h * w))
    n_pieces, pieces = connected_components(graph, directed=False)
    sizes = np.bincount(pieces, minlength=n_pieces)

    merged = _merge_small(pieces.tolist(), sizes.tolist(), s4.tolist(), d4.tolist(),
                          params.min_size)
    return SuperpixelMap.from_ids(_contiguous(merged[pieces], h, w))


def write_superpixel_map(path, spmap: SuperpixelMap) -> None:
    with open(path, "w") as fh:
        fh.write(f"{spmap.width} {spmap.height} {spmap.n_segments}\n")
        for row in spmap.ids:
            fh.write(" ".join(map(str, row.tolist())))
            fh.write("\n")


def read_superpixel_map(path) -> SuperpixelMap:
    path = os.fspath(path)
    if not os.path.exists(path):
        raise MissingArtifactError(f"superpixel map not found: {path}")
    with open(path) as fh:
        header = fh.readline().split()
        try:
            w, h, n = (int(v) for v in header)
        except ValueError as exc:
            raise InvalidInputError(f"{path}:1: expected 'W H N' header") from exc
        ids = np.loadtxt(fh, dtype=np.int64, ndmin=2)
    if ids.shape != (h, w):
        raise InvalidInputError(f"{path}: grid is {ids.shape[1]}x{ids.shape[0]}, header says {w}x{h}")
    spmap = SuperpixelMap.from_ids(ids)
    if spmap.n_segments != n:
        raise InvalidInputError(f"{path}: header declares {n} superpixels, grid has {spmap.n_segments}")
    return spmap
