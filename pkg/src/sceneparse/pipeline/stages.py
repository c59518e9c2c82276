"""Individual training and inference stages.

Each function is a pure step over in-memory data; :class:`SceneParser`
chains them and the CLI runs them one at a time against an artifact
directory.
"""
from __future__ import annotations

import logging

import numpy as np
from joblib import Parallel, delayed

from ..classify import OneVsAllClassifier
from ..context import fit_fusion, global_votes_all, local_votes_all, normalize_votes
from ..exceptions import InvalidInputError
from ..features import ClassSpecificMRMR, Discretizer, build_codebook, extract_features
from ..imgseg import SegParams, segment
from ..prior import (
    VOID,
    BlockGrid,
    adjacency_label_pairs,
    build_global_prior,
    build_local_prior,
    superpixel_labels,
)

logger = logging.getLogger(__name__)


def seg_params(image, cfg) -> SegParams:
    return SegParams.for_image(image, cfg.sigma, cfg.min_size, cfg.k_base, cfg.k_reference)


def _parallel(fn, items, n_jobs):
    if n_jobs == 1 or len(items) < 2:
        return [fn(*it) for it in items]
    return Parallel(n_jobs=n_jobs)(delayed(fn)(*it) for it in items)


def _segment_one(image, cfg):
    return segment(image, seg_params(image, cfg))


def segment_images(images, cfg):
    return _parallel(_segment_one, [(img, cfg) for img in images], cfg.n_jobs)


def train_codebooks(images, cfg):
    texton = build_codebook("texton", images, cfg.texton_budget, cfg.seed, cfg.codebook_size)
    descriptor = build_codebook("descriptor", images, cfg.descriptor_budget, cfg.seed,
                                cfg.codebook_size)
    return texton, descriptor


def _extract_one(image, spmap, codebooks, cfg):
    return extract_features(image, spmap, codebooks[0], codebooks[1], cfg.dilation_radius)


def extract_all(images, spmaps, codebooks, cfg):
    return _parallel(_extract_one, [(img, sp, codebooks, cfg) for img, sp in zip(images, spmaps)],
                     cfg.n_jobs)


def label_superpixels(spmaps, label_maps, n_classes):
    return [superpixel_labels(sp, lab, n_classes) for sp, lab in zip(spmaps, label_maps)]


def block_ids(spmap, cfg) -> np.ndarray:
    grid = BlockGrid(spmap.width, spmap.height, cfg.blocks_x, cfg.blocks_y)
    return grid.block_of(spmap.centroids)


def fusion_split(n_images, fraction, seed):
    """Image indices for classifier training and for fusion fitting.

    With ``fraction == 0`` or fewer than two images both sets are everything.
    """
    idx = np.arange(n_images)
    n_fusion = int(round(fraction * n_images))
    if n_fusion == 0 or n_images < 2:
        return idx, idx
    n_fusion = min(n_fusion, n_images - 1)
    order = np.random.default_rng(seed).permutation(n_images)
    return np.sort(order[n_fusion:]), np.sort(order[:n_fusion])


def stack_labelled(features, sp_labels):
    """Training rows of non-void superpixels across images."""
    X = np.concatenate(features)
    y = np.concatenate(sp_labels)
    keep = y != VOID
    if not keep.any():
        raise InvalidInputError("no labelled superpixels in the training images")
    return X[keep], y[keep]


def select_features(X, y, n_classes, cfg):
    disc = Discretizer().fit(X)
    selector = ClassSpecificMRMR(n_classes, cfg.n_selected).fit(disc.transform(X), y)
    return disc, selector.selected_


def train_classifiers(X, y, selected, n_classes, cfg):
    return OneVsAllClassifier(n_classes, selected, cfg.clf_alpha, cfg.clf_max_iter, cfg.clf_tol,
                              cfg.seed).fit(X, y)


def build_priors(spmaps, sp_labels, n_classes, cfg):
    n_blocks = cfg.blocks_x * cfg.blocks_y
    records = [(block_ids(sp, cfg), lab, sp.counts) for sp, lab in zip(spmaps, sp_labels)]
    gprior = build_global_prior(records, n_blocks, n_classes, cfg.prior_alpha)
    pairs = np.concatenate([adjacency_label_pairs(sp, lab) for sp, lab in zip(spmaps, sp_labels)])
    lprior = build_local_prior(pairs, n_classes)
    return gprior, lprior


def context_probabilities(spmap, pv, gprior, lprior, cfg, weighting="voter"):
    """``(P^l, P^g)`` for every superpixel given visual probabilities ``pv``."""
    pv = np.asarray(pv)
    classes = np.argmax(pv, axis=1)
    conf = pv[np.arange(len(pv)), classes]
    blocks = block_ids(spmap, cfg)
    vg = global_votes_all(blocks, classes, conf, spmap.counts, gprior, weighting)
    vl = local_votes_all(spmap.neighbors, classes, conf, spmap.counts, lprior, weighting)
    return normalize_votes(vl), normalize_votes(vg)


def fusion_triples(spmaps, features, sp_labels, classifier, gprior, lprior, cfg):
    pvs, pls, pgs, ys = [], [], [], []
    for sp, X, lab in zip(spmaps, features, sp_labels):
        pv = classifier.predict_proba(X)
        pl, pg = context_probabilities(sp, pv, gprior, lprior, cfg)
        keep = np.asarray(lab) != VOID
        pvs.append(pv[keep])
        pls.append(pl[keep])
        pgs.append(pg[keep])
        ys.append(np.asarray(lab)[keep])
    return (np.concatenate(pvs), np.concatenate(pls), np.concatenate(pgs), np.concatenate(ys))


def train_fusion(spmaps, features, sp_labels, classifier, gprior, lprior, n_classes, cfg):
    pv, pl, pg, y = fusion_triples(spmaps, features, sp_labels, classifier, gprior, lprior, cfg)
    return fit_fusion(pv, pl, pg, y, n_classes, tol=cfg.fusion_tol)


__all__ = [
    "seg_params",
    "segment_images",
    "train_codebooks",
    "extract_all",
    "label_superpixels",
    "block_ids",
    "fusion_split",
    "stack_labelled",
    "select_features",
    "train_classifiers",
    "build_priors",
    "context_probabilities",
    "fusion_triples",
    "train_fusion",
]
