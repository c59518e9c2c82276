"""Superpixel visual-feature vectors.

Column layout of the 537-dim row vector:

====================  =========================================
``[0:6)``             RGB mean then RGB standard deviation
``[6:7)``             bounding-box top row over image height
``[7:71)``            8x8 shape mask over the bounding box
``[71:104)``          11-bin R, G, B histograms
``[104:204)``         texton-word histogram
``[204:304)``         gradient-descriptor-word histogram
``[304:537)``         RGB, texton and descriptor histograms over
                      the region dilated by a radius-10 disk
====================  =========================================
"""
from __future__ import annotations

import os

import numpy as np
from scipy import ndimage

from ..exceptions import InvalidInputError, MissingArtifactError

N_FEATURES = 537
COLOR_BINS = 11
MASK_SIDE = 8

MEAN_RGB = slice(0, 3)
STD_RGB = slice(3, 6)
TOP_RATIO = 6
SHAPE_MASK = slice(7, 71)
RGB_HIST = slice(71, 104)
TEXTON_HIST = slice(104, 204)
DESCRIPTOR_HIST = slice(204, 304)
DILATED_RGB_HIST = slice(304, 337)
DILATED_TEXTON_HIST = slice(337, 437)
DILATED_DESCRIPTOR_HIST = slice(437, 537)


def _area_resample_matrix(n_in: int, n_out: int) -> np.ndarray:
    """Row ``i`` averages the input samples overlapping output cell ``i``."""
    edges = np.arange(n_out + 1) * (n_in / n_out)
    lo = np.maximum(edges[:-1, None], np.arange(n_in)[None, :])
    hi = np.minimum(edges[1:, None], np.arange(1, n_in + 1)[None, :])
    overlap = np.clip(hi - lo, 0.0, None)
    return overlap / overlap.sum(axis=1, keepdims=True)


def shape_mask(occupancy, side=MASK_SIDE) -> np.ndarray:
    """Occupancy of a bounding-box crop averaged onto a ``side x side`` grid."""
    occupancy = np.asarray(occupancy, dtype=np.float64)
    ry = _area_resample_matrix(occupancy.shape[0], side)
    rx = _area_resample_matrix(occupancy.shape[1], side)
    return np.clip(ry @ occupancy @ rx.T, 0.0, 1.0)


def disk(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius * radius


def color_bins(image, n_bins=COLOR_BINS) -> np.ndarray:
    """Uniform-bin index over [0, 255] for every pixel and channel."""
    image = np.asarray(image, dtype=np.float64)
    return np.minimum((image * n_bins / 256.0).astype(np.int64), n_bins - 1)


def _histogram(values, n_bins) -> np.ndarray:
    counts = np.bincount(values, minlength=n_bins).astype(np.float64)
    assert counts.sum() > 0, "histogram over an empty region"
    return counts / counts.sum()


def _region_histograms(flat_idx, bins, textons, descriptors, n_words_t, n_words_d):
    rgb = [_histogram(bins[flat_idx, ch], COLOR_BINS) for ch in range(3)]
    return np.concatenate(rgb + [_histogram(textons[flat_idx], n_words_t),
                                 _histogram(descriptors[flat_idx], n_words_d)])


def extract_features(image, spmap, texton_codebook, descriptor_codebook,
                     dilation_radius=10, texton_words=None, descriptor_words=None) -> np.ndarray:
    """Return the ``(N, 537)`` feature matrix of ``spmap``'s superpixels.

    Precomputed per-pixel word maps may be passed to skip quantization.
    """
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[:2] != spmap.ids.shape:
        raise InvalidInputError(
            f"image shape {image.shape[:2]} does not match superpixel map {spmap.ids.shape}")
    if texton_codebook.size != 100 or descriptor_codebook.size != 100:
        raise InvalidInputError("feature layout requires two 100-word codebooks")
    h, w = spmap.ids.shape
    if texton_words is None:
        texton_words = texton_codebook.word_map(image)
    if descriptor_words is None:
        descriptor_words = descriptor_codebook.word_map(image)
    textons = np.asarray(texton_words).ravel()
    descriptors = np.asarray(descriptor_words).ravel()
    rgb = image.reshape(-1, 3).astype(np.float64)
    bins = color_bins(image).reshape(-1, 3)
    structure = disk(dilation_radius)
    ids = spmap.ids

    out = np.empty((spmap.n_segments, N_FEATURES))
    for j, idx in enumerate(spmap.pixel_indices()):
        top, left, bottom, right = spmap.bboxes[j]
        px = rgb[idx]
        row = out[j]
        row[MEAN_RGB] = px.mean(axis=0)
        row[STD_RGB] = px.std(axis=0)
        row[TOP_RATIO] = top / h
        crop = ids[top:bottom + 1, left:right + 1] == j
        row[SHAPE_MASK] = shape_mask(crop).ravel()
        row[RGB_HIST.start:DESCRIPTOR_HIST.stop] = _region_histograms(
            idx, bins, textons, descriptors, texton_codebook.size, descriptor_codebook.size)

        y0, x0 = max(0, top - dilation_radius), max(0, left - dilation_radius)
        y1, x1 = min(h, bottom + dilation_radius + 1), min(w, right + dilation_radius + 1)
        region = ndimage.binary_dilation(ids[y0:y1, x0:x1] == j, structure=structure)
        rr, cc = np.nonzero(region)
        dil_idx = (rr + y0) * w + (cc + x0)
        row[DILATED_RGB_HIST.start:] = _region_histograms(
            dil_idx, bins, textons, descriptors, texton_codebook.size, descriptor_codebook.size)
    return out


def write_feature_matrix(path, matrix) -> None:
    matrix = np.asarray(matrix)
    header = ",".join(str(i) for i in range(matrix.shape[1]))
    np.savetxt(path, matrix, delimiter=",", fmt="%.17g", header=header, comments="")


def read_feature_matrix(path) -> np.ndarray:
    if not os.path.exists(path):
        raise MissingArtifactError(f"feature matrix not found: {path}")
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = np.loadtxt(fh, delimiter=",", ndmin=2)
    if data.size and data.shape[1] != len(header):
        raise InvalidInputError(f"{path}: {data.shape[1]} columns, header lists {len(header)}")
    return data.reshape(-1, len(header))
