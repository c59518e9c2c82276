"""Label-map overlays."""
from __future__ import annotations

import numpy as np

from ..exceptions import InvalidInputError
from ..io import write_ppm


def render_overlay(image, labels, palette, alpha=0.5) -> np.ndarray:
    """Blend class colors into ``image``; void (-1) pixels keep their color."""
    image = np.asarray(image)
    labels = np.asarray(labels)
    if image.shape[:2] != labels.shape:
        raise InvalidInputError(f"image {image.shape[:2]} and labels {labels.shape} differ in size")
    if not 0.0 <= alpha <= 1.0:
        raise InvalidInputError(f"alpha must lie in [0, 1], got {alpha}")
    n_needed = int(labels.max()) + 1 if labels.size else 0
    if len(palette) < n_needed:
        raise InvalidInputError(f"palette has {len(palette)} colors, labels need {n_needed}")
    colors = np.asarray(palette, dtype=np.float64).reshape(-1, 3)
    out = image.astype(np.float64).copy()
    keep = labels >= 0
    out[keep] = (1.0 - alpha) * out[keep] + alpha * colors[labels[keep]]
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


def write_overlay(path, image, labels, palette, alpha=0.5) -> None:
    write_ppm(path, render_overlay(image, labels, palette, alpha))
