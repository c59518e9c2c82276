"""Dense per-pixel texture descriptors.

Two descriptor families feed the visual-word histograms:

* filter-bank responses (17 channels): Gaussians at sigma 1, 2, 4 on each
  RGB channel, Laplacians of Gaussian at sigma 1, 2, 4, 8 and x/y first
  derivatives of Gaussian at sigma 2, 4 on the intensity image;
* gradient-orientation histograms (128 channels): 4x4 cells of 4x4 pixels,
  8 orientation bins each, over a 16x16 patch centred on the pixel, then
  normalized, clipped at 0.2 and renormalized.
"""
from __future__ import annotations

import numpy as np
from scipy import ndimage

TEXTON_DIM = 17
GRADIENT_DIM = 128

_GAUSS_SIGMAS = (1.0, 2.0, 4.0)
_LOG_SIGMAS = (1.0, 2.0, 4.0, 8.0)
_DOG_SIGMAS = (2.0, 4.0)


def _intensity(image: np.ndarray) -> np.ndarray:
    image = np.asarray(image, dtype=np.float64)
    return image @ np.array([0.299, 0.587, 0.114])


def filter_bank_responses(image) -> np.ndarray:
    """Return an ``(H, W, 17)`` array of filter responses."""
    image = np.asarray(image, dtype=np.float64)
    gray = _intensity(image)
    out = []
    for sigma in _GAUSS_SIGMAS:
        for ch in range(3):
            out.append(ndimage.gaussian_filter(image[:, :, ch], sigma, mode="reflect"))
    for sigma in _LOG_SIGMAS:
        out.append(ndimage.gaussian_laplace(gray, sigma, mode="reflect"))
    for sigma in _DOG_SIGMAS:
        out.append(ndimage.gaussian_filter(gray, sigma, order=(0, 1), mode="reflect"))
        out.append(ndimage.gaussian_filter(gray, sigma, order=(1, 0), mode="reflect"))
    return np.stack(out, axis=-1)


def _orientation_maps(gray: np.ndarray, n_bins: int = 8) -> np.ndarray:
    gy, gx = np.gradient(gray)
    mag = np.hypot(gx, gy)
    theta = np.mod(np.arctan2(gy, gx), 2 * np.pi) * (n_bins / (2 * np.pi))
    lo = np.floor(theta).astype(np.int64) % n_bins
    hi = (lo + 1) % n_bins
    frac = theta - np.floor(theta)
    maps = np.zeros((n_bins,) + gray.shape)
    rows, cols = np.indices(gray.shape)
    np.add.at(maps, (lo, rows, cols), mag * (1 - frac))
    np.add.at(maps, (hi, rows, cols), mag * frac)
    return maps


def gradient_descriptors(image, positions=None, cell=4, n_cells=4, n_bins=8) -> np.ndarray:
    """Gradient-orientation histograms centred on ``positions``.

    ``positions`` is an ``(P, 2)`` array of ``(row, col)`` pixel positions;
    by default every pixel is described and the result has shape
    ``(H, W, 128)``, otherwise ``(P, 128)``.
    """
    gray = _intensity(image)
    h, w = gray.shape
    half = cell * n_cells // 2
    maps = _orientation_maps(gray, n_bins)
    # cell sums with the cell's top-left corner at (r - half, c - half) after padding
    pad = half + cell
    padded = np.pad(maps, ((0, 0), (pad, pad), (pad, pad)))
    integral = np.zeros((n_bins, padded.shape[1] + 1, padded.shape[2] + 1))
    integral[:, 1:, 1:] = padded.cumsum(1).cumsum(2)
    cellsum = (integral[:, cell:, cell:] - integral[:, :-cell, cell:]
               - integral[:, cell:, :-cell] + integral[:, :-cell, :-cell])

    if positions is None:
        rr, cc = np.indices((h, w))
        rr, cc = rr.ravel(), cc.ravel()
    else:
        positions = np.asarray(positions, dtype=np.int64).reshape(-1, 2)
        rr, cc = positions[:, 0], positions[:, 1]
    parts = []
    for i in range(n_cells):
        for j in range(n_cells):
            r = rr - half + i * cell + pad
            c = cc - half + j * cell + pad
            parts.append(cellsum[:, r, c].T)
    desc = np.concatenate(parts, axis=1)

    # integral-image differences can leave -1e-15 residue
    desc = np.maximum(desc, 0.0)
    norm = np.linalg.norm(desc, axis=1, keepdims=True)
    desc = np.divide(desc, norm, out=np.zeros_like(desc), where=norm > 0)
    desc = np.minimum(desc, 0.2)
    norm = np.linalg.norm(desc, axis=1, keepdims=True)
    desc = np.divide(desc, norm, out=np.zeros_like(desc), where=norm > 0)
    if positions is None:
        return desc.reshape(h, w, -1)
    return desc


def grid_positions(shape, stride=8) -> np.ndarray:
    """``(row, col)`` sample positions on a regular grid offset by half a stride."""
    h, w = shape[:2]
    rows = np.arange(stride // 2, h, stride)
    cols = np.arange(stride // 2, w, stride)
    rr, cc = np.meshgrid(rows, cols, indexing="ij")
    return np.stack([rr.ravel(), cc.ravel()], axis=1)
