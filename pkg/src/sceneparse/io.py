"""Netpbm images and integer label grids.

Images are handled as ``(H, W, 3)`` uint8 arrays throughout the package.
"""
from __future__ import annotations

import os

import numpy as np

from .exceptions import InvalidInputError, MissingArtifactError


def _read_tokens(data: bytes, count: int, pos: int):
    """Read ``count`` whitespace separated header tokens, skipping comments."""
    tokens = []
    n = len(data)
    while len(tokens) < count:
        while pos < n and data[pos:pos + 1].isspace():
            pos += 1
        if pos < n and data[pos:pos + 1] == b"#":
            while pos < n and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < n and not data[pos:pos + 1].isspace():
            pos += 1
        if start == pos:
            raise InvalidInputError("truncated netpbm header")
        tokens.append(data[start:pos])
    # exactly one whitespace byte separates the header from the raster
    return tokens, pos + 1


def read_ppm(path) -> np.ndarray:
    """Read a binary PPM (P6) or PGM (P5) file as an RGB uint8 array."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise MissingArtifactError(f"image not found: {path}")
    with open(path, "rb") as fh:
        data = fh.read()
    magic = data[:2]
    if magic not in (b"P6", b"P5"):
        raise InvalidInputError(f"{path}: unsupported netpbm magic {magic!r}")
    (w, h, maxval), pos = _read_tokens(data, 3, 2)
    try:
        w, h, maxval = int(w), int(h), int(maxval)
    except ValueError as exc:
        raise InvalidInputError(f"{path}: malformed header") from exc
    if w < 1 or h < 1:
        raise InvalidInputError(f"{path}: image must be at least 1x1, got {w}x{h}")
    if maxval != 255:
        raise InvalidInputError(f"{path}: only 8-bit images are supported (maxval={maxval})")
    channels = 3 if magic == b"P6" else 1
    raster = np.frombuffer(data, dtype=np.uint8, count=w * h * channels, offset=pos) \
        if len(data) - pos >= w * h * channels else None
    if raster is None:
        raise InvalidInputError(f"{path}: truncated raster data")
    raster = raster.reshape(h, w, channels)
    if channels == 1:
        raster = np.repeat(raster, 3, axis=2)
    return raster.copy()


def write_ppm(path, image: np.ndarray) -> None:
    image = np.asarray(image)
    if image.ndim != 3 or image.shape[2] != 3:
        raise InvalidInputError(f"expected an (H, W, 3) image, got shape {image.shape}")
    h, w = image.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(np.ascontiguousarray(image, dtype=np.uint8).tobytes())


def read_label_grid(path) -> np.ndarray:
    """Read ``H`` lines of ``W`` integers; ``-1`` marks void pixels."""
    path = os.fspath(path)
    if not os.path.exists(path):
        raise MissingArtifactError(f"label grid not found: {path}")
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                rows.append([int(tok) for tok in line.split()])
            except ValueError as exc:
                raise InvalidInputError(f"{path}:{lineno}: non-integer label") from exc
            if len(rows[-1]) != len(rows[0]):
                raise InvalidInputError(
                    f"{path}:{lineno}: expected {len(rows[0])} labels, got {len(rows[-1])}")
    if not rows:
        raise InvalidInputError(f"{path}: empty label grid")
    return np.asarray(rows, dtype=np.int64)


def write_label_grid(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels)
    with open(path, "w") as fh:
        for row in labels:
            fh.write(" ".join(str(int(v)) for v in row))
            fh.write("\n")
