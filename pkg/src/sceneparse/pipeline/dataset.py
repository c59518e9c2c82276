"""Dataset manifests, loading and fold splitting.

A manifest is a JSON file::

    {
      "classes": ["sky", "tree", ...],
      "palette": [[128, 128, 255], [0, 128, 0], ...],
      "pairs": [["img/0001.ppm", "lab/0001.txt"], ...]
    }

Relative paths resolve against the manifest's directory.  Label files are
``H`` lines of ``W`` integers, ``-1`` for void.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InvalidInputError, MissingArtifactError
from ..io import read_label_grid, read_ppm

DEFAULT_PALETTE = [
    (128, 128, 255), (0, 128, 0), (128, 64, 128), (0, 255, 0),
    (0, 0, 255), (128, 0, 0), (128, 128, 0), (255, 128, 0),
]


def default_palette(n_classes):
    rng = np.random.default_rng(0)
    extra = [tuple(int(v) for v in rng.integers(0, 256, 3)) for _ in range(max(0, n_classes - 8))]
    return [tuple(c) for c in DEFAULT_PALETTE[:n_classes]] + extra


@dataclass
class DatasetManifest:
    classes: list
    pairs: list
    palette: list = field(default_factory=list)
    root: str = "."

    def __post_init__(self):
        if not self.palette:
            self.palette = default_palette(len(self.classes))

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def resolve(self, path) -> str:
        return path if os.path.isabs(path) else os.path.join(self.root, path)

    @classmethod
    def load(cls, path) -> "DatasetManifest":
        if not os.path.exists(path):
            raise MissingArtifactError(f"manifest not found: {path}")
        with open(path) as fh:
            try:
                data = json.load(fh)
            except json.JSONDecodeError as exc:
                raise InvalidInputError(f"{path}:{exc.lineno}: {exc.msg}") from exc
        for key in ("classes", "pairs"):
            if key not in data:
                raise InvalidInputError(f"{path}: manifest lacks {key!r}")
        pairs = [tuple(p) for p in data["pairs"]]
        if any(len(p) != 2 for p in pairs):
            raise InvalidInputError(f"{path}: every pair must be [image, labels]")
        palette = [tuple(int(v) for v in c) for c in data.get("palette", [])]
        if palette and len(palette) < len(data["classes"]):
            raise InvalidInputError(f"{path}: palette has fewer colors than classes")
        return cls(list(data["classes"]), pairs, palette,
                   os.path.dirname(os.path.abspath(path)))

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump({"classes": self.classes, "palette": [list(c) for c in self.palette],
                       "pairs": [list(p) for p in self.pairs]}, fh, indent=1)

    def stems(self):
        return [os.path.splitext(os.path.basename(img))[0] for img, _ in self.pairs]


@dataclass
class Dataset:
    manifest: DatasetManifest
    images: list
    labels: list

    def __len__(self):
        return len(self.images)

    def subset(self, indices) -> "Dataset":
        indices = list(indices)
        man = DatasetManifest(self.manifest.classes, [self.manifest.pairs[i] for i in indices],
                              self.manifest.palette, self.manifest.root)
        return Dataset(man, [self.images[i] for i in indices], [self.labels[i] for i in indices])


def load_labels(path, image_shape, n_classes, image_path="<image>") -> np.ndarray:
    labels = read_label_grid(path)
    if labels.shape != tuple(image_shape[:2]):
        raise InvalidInputError(
            f"dimension mismatch: {path} is {labels.shape[1]}x{labels.shape[0]} but "
            f"{image_path} is {image_shape[1]}x{image_shape[0]}")
    bad = (labels < -1) | (labels >= n_classes)
    if bad.any():
        row, col = (int(v) for v in np.argwhere(bad)[0])
        raise InvalidInputError(
            f"{path}:{row + 1}: label {labels[row, col]} at column {col + 1} outside [0, {n_classes})")
    return labels


def load_dataset(manifest) -> Dataset:
    """Load every image/label pair named by ``manifest`` (a path or manifest)."""
    if not isinstance(manifest, DatasetManifest):
        manifest = DatasetManifest.load(manifest)
    images, labels = [], []
    for img_rel, lab_rel in manifest.pairs:
        img_path, lab_path = manifest.resolve(img_rel), manifest.resolve(lab_rel)
        image = read_ppm(img_path)
        images.append(image)
        labels.append(load_labels(lab_path, image.shape, manifest.n_classes, img_path))
    return Dataset(manifest, images, labels)


def split_folds(n_items, folds=5, seed=42):
    """Seeded shuffle then contiguous chunks.

    Returns a list of ``(train_indices, test_indices)`` per fold; test
    folds partition ``range(n_items)`` and differ in size by at most one.
    """
    n = n_items if isinstance(n_items, (int, np.integer)) else len(n_items)
    if folds < 2:
        raise InvalidInputError(f"need at least 2 folds, got {folds}")
    if n < folds:
        raise InvalidInputError(f"cannot split {n} items into {folds} folds")
    order = np.random.default_rng(seed).permutation(n)
    chunks = np.array_split(order, folds)
    out = []
    for i, test in enumerate(chunks):
        train = np.concatenate([c for j, c in enumerate(chunks) if j != i])
        out.append((np.sort(train), np.sort(test)))
    return out
