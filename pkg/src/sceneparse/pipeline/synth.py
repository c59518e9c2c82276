"""Synthetic labelled scenes with a fixed spatial layout.

A :class:`SceneGrammar` holds one or more layouts, picked uniformly per
image.  A layout stacks horizontal rows and each row is split into regions,
one class per region.  Regions draw their base color from an appearance
pool.  Classes that share a pool and a position (in different layouts)
can only be told apart by the classes they co-occur with.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import InvalidInputError
from ..io import write_label_grid, write_ppm
from .dataset import Dataset, DatasetManifest


@dataclass(frozen=True)
class Region:
    name: str
    width: float
    appearance: str


@dataclass(frozen=True)
class Row:
    height: float
    regions: tuple


@dataclass(frozen=True)
class SceneGrammar:
    layouts: tuple
    appearances: dict = field(hash=False)
    # boundary displacement per image, as a fraction of the image side
    jitter: float = 0.04
    # per-image shift of each base color channel
    color_jitter: float = 12.0
    # appearance -> patch size in pixels; such regions are filled with a
    # Voronoi mosaic of pool colors instead of a single color
    mosaic: dict = field(default_factory=dict, hash=False)

    def __post_init__(self):
        if not self.layouts or not all(self.layouts):
            raise InvalidInputError("grammar needs at least one layout with at least one row")
        for row in self._rows():
            if row.height <= 0 or not row.regions:
                raise InvalidInputError("every grammar row needs a positive height and a region")
            for reg in row.regions:
                if reg.width <= 0:
                    raise InvalidInputError(f"region {reg.name!r} has zero area")
                if not self.appearances.get(reg.appearance):
                    raise InvalidInputError(f"region {reg.name!r} has no colors for "
                                            f"appearance {reg.appearance!r}")

    def _rows(self):
        return [row for layout in self.layouts for row in layout]

    @property
    def classes(self) -> list:
        names = []
        for row in self._rows():
            for reg in row.regions:
                if reg.name not in names:
                    names.append(reg.name)
        return names

    def palette(self) -> list:
        out = []
        for name in self.classes:
            reg = next(r for row in self._rows() for r in row.regions if r.name == name)
            out.append(tuple(int(v) for v in self.appearances[reg.appearance][0]))
        return out


def default_grammar() -> SceneGrammar:
    """Outdoor (sky over sea) and indoor (wall over floor) scenes.

    Sea and floor share one mosaic color pool and the same place in the
    image.
    """
    ground = ((150, 90, 60), (70, 70, 80), (180, 170, 120), (60, 120, 140), (120, 150, 70),
              (200, 130, 170))
    return SceneGrammar(
        layouts=(
            (Row(0.35, (Region("sky", 1.0, "sky"),)), Row(0.65, (Region("sea", 1.0, "ground"),))),
            (Row(0.35, (Region("wall", 1.0, "wall"),)), Row(0.65, (Region("floor", 1.0, "ground"),))),
        ),
        appearances={"sky": ((110, 160, 230),), "wall": ((200, 60, 60),), "ground": ground},
        mosaic={"ground": 12},
    )


def _mosaic(shape, patch, pool, color_jitter, rng):
    h, w = shape
    n_seeds = max(1, int(round(h * w / float(patch * patch))))
    seeds = rng.uniform([0, 0], [h, w], size=(n_seeds, 2))
    rr, cc = np.indices((h, w))
    d2 = (rr[..., None] - seeds[:, 0]) ** 2 + (cc[..., None] - seeds[:, 1]) ** 2
    cell = np.argmin(d2, axis=-1)
    colors = np.asarray(pool, dtype=np.float64)[rng.integers(len(pool), size=n_seeds)]
    colors = colors + rng.uniform(-color_jitter, color_jitter, colors.shape)
    return colors[cell]


def _cuts(fractions, length, jitter, rng):
    cum = np.cumsum(fractions) / np.sum(fractions)
    inner = cum[:-1] * length + rng.uniform(-jitter, jitter, len(cum) - 1) * length
    cuts = np.concatenate([[0], np.rint(inner), [length]]).astype(np.int64)
    cuts = np.clip(cuts, 0, length)
    if np.any(np.diff(cuts) <= 0):
        raise InvalidInputError("image too small for the grammar: a region vanished")
    return cuts


def generate_scene(grammar: SceneGrammar, size=(96, 96), noise=10.0, rng=None):
    """One ``(image, labels)`` pair drawn from ``grammar``."""
    rng = np.random.default_rng(rng)
    h, w = size
    class_id = {name: i for i, name in enumerate(grammar.classes)}
    image = np.zeros((h, w, 3))
    labels = np.zeros((h, w), dtype=np.int64)
    used = {}
    layout = grammar.layouts[int(rng.integers(len(grammar.layouts)))]
    row_cuts = _cuts([r.height for r in layout], h, grammar.jitter, rng)
    for ri, row in enumerate(layout):
        col_cuts = _cuts([g.width for g in row.regions], w, grammar.jitter, rng)
        for gi, reg in enumerate(row.regions):
            pool = grammar.appearances[reg.appearance]
            ys = slice(row_cuts[ri], row_cuts[ri + 1])
            xs = slice(col_cuts[gi], col_cuts[gi + 1])
            labels[ys, xs] = class_id[reg.name]
            if reg.appearance in grammar.mosaic:
                shape = (ys.stop - ys.start, xs.stop - xs.start)
                image[ys, xs] = _mosaic(shape, grammar.mosaic[reg.appearance], pool,
                                        grammar.color_jitter, rng)
                continue
            taken = used.setdefault(reg.appearance, [])
            free = [i for i in range(len(pool)) if i not in taken] or list(range(len(pool)))
            pick = free[int(rng.integers(len(free)))]
            taken.append(pick)
            base = np.asarray(pool[pick], dtype=np.float64)
            image[ys, xs] = base + rng.uniform(-grammar.color_jitter, grammar.color_jitter, 3)
    if noise > 0:
        image = image + rng.normal(0.0, noise, image.shape)
    return np.clip(np.rint(image), 0, 255).astype(np.uint8), labels


def generate_corpus(n_images, seed=42, grammar=None, size=(96, 96), noise=10.0) -> Dataset:
    """In-memory corpus; pairs are named ``scene_XXXX``."""
    grammar = grammar or default_grammar()
    rng = np.random.default_rng(seed)
    images, labels, pairs = [], [], []
    for i in range(n_images):
        img, lab = generate_scene(grammar, size, noise, rng)
        images.append(img)
        labels.append(lab)
        pairs.append((f"images/scene_{i:04d}.ppm", f"labels/scene_{i:04d}.txt"))
    manifest = DatasetManifest(grammar.classes, pairs, grammar.palette())
    return Dataset(manifest, images, labels)


def synth_corpus(out_dir, n_images, seed=42, grammar=None, size=(96, 96), noise=10.0) -> DatasetManifest:
    """Write a corpus plus ``manifest.json`` under ``out_dir``."""
    data = generate_corpus(n_images, seed, grammar, size, noise)
    os.makedirs(os.path.join(out_dir, "images"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "labels"), exist_ok=True)
    for (img_rel, lab_rel), img, lab in zip(data.manifest.pairs, data.images, data.labels):
        write_ppm(os.path.join(out_dir, img_rel), img)
        write_label_grid(os.path.join(out_dir, lab_rel), lab)
    manifest = data.manifest
    manifest.root = os.path.abspath(out_dir)
    manifest.save(os.path.join(out_dir, "manifest.json"))
    return manifest
