"""End-to-end scene parser with an estimator interface."""
from __future__ import annotations

import logging
from dataclasses import dataclass, fields

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ..context import FusionModel, final_label, fuse
from ..exceptions import InvalidInputError, SceneParseError
from ..imgseg import SuperpixelMap
from .artifacts import ArtifactStore
from .config import RunConfig
from .metrics import Metrics, evaluate
from . import stages

logger = logging.getLogger(__name__)

_CONFIG_FIELDS = tuple(f.name for f in fields(RunConfig) if f.name != "folds")


@dataclass(frozen=True, eq=False)
class ParseResult:
    """Everything :meth:`SceneParser.parse` knows about one image."""

    labels: np.ndarray          # fused per-pixel labels
    visual_labels: np.ndarray   # per-pixel argmax of the visual probabilities
    spmap: SuperpixelMap
    visual: np.ndarray          # (N, M) P^v
    local: np.ndarray           # (N, M) P^l
    global_: np.ndarray         # (N, M) P^g
    fused: np.ndarray           # (N, M) fused probabilities
    superpixel_labels: np.ndarray


def _stage(name, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except SceneParseError as exc:
        raise type(exc)(f"stage {name!r} failed: {exc}") from exc


class SceneParser(BaseEstimator):
    """Superpixel scene parser with block-constrained context priors.

    ``fit`` learns codebooks, feature subsets, one-vs-all classifiers, the
    global and local co-occurrence priors and the per-class fusion weights
    from labelled images.  ``predict`` returns a label map per image.

    All keyword arguments mirror :class:`RunConfig`.

    Parameters
    ----------
    n_classes : int
        Number of classes; labels are ``0..n_classes-1`` with ``-1`` void.
    """

    def __init__(self, n_classes, sigma=0.8, min_size=100, k_base=200.0, k_reference=640.0,
                 blocks_x=6, blocks_y=6, n_selected=50, codebook_size=100, texton_budget=20000,
                 descriptor_budget=20000, descriptor_stride=8, dilation_radius=10,
                 clf_alpha=1e-3, clf_max_iter=5000, clf_tol=1e-6, prior_alpha=1.0,
                 fusion_fraction=0.2, fusion_tol=1e-8, seed=42, n_jobs=1):
        self.n_classes = n_classes
        self.sigma = sigma
        self.min_size = min_size
        self.k_base = k_base
        self.k_reference = k_reference
        self.blocks_x = blocks_x
        self.blocks_y = blocks_y
        self.n_selected = n_selected
        self.codebook_size = codebook_size
        self.texton_budget = texton_budget
        self.descriptor_budget = descriptor_budget
        self.descriptor_stride = descriptor_stride
        self.dilation_radius = dilation_radius
        self.clf_alpha = clf_alpha
        self.clf_max_iter = clf_max_iter
        self.clf_tol = clf_tol
        self.prior_alpha = prior_alpha
        self.fusion_fraction = fusion_fraction
        self.fusion_tol = fusion_tol
        self.seed = seed
        self.n_jobs = n_jobs

    @classmethod
    def from_config(cls, cfg: RunConfig, n_classes) -> "SceneParser":
        return cls(n_classes, **{name: getattr(cfg, name) for name in _CONFIG_FIELDS})

    @property
    def config(self) -> RunConfig:
        return RunConfig(**{name: getattr(self, name) for name in _CONFIG_FIELDS})

    def fit(self, images, label_maps):
        images = [np.asarray(img) for img in images]
        label_maps = [np.asarray(lab) for lab in label_maps]
        if len(images) != len(label_maps) or not images:
            raise InvalidInputError("fit needs equally many (>= 1) images and label maps")
        cfg, m = self.config, self.n_classes

        spmaps = _stage("segment", stages.segment_images, images, cfg)
        sp_labels = _stage("labels", stages.label_superpixels, spmaps, label_maps, m)
        self.codebooks_ = _stage("codebook", stages.train_codebooks, images, cfg)
        features = _stage("features", stages.extract_all, images, spmaps, self.codebooks_, cfg)
        self._fit_from_features(spmaps, features, sp_labels)
        return self

    def _fit_from_features(self, spmaps, features, sp_labels):
        cfg, m = self.config, self.n_classes
        clf_idx, fus_idx = stages.fusion_split(len(spmaps), cfg.fusion_fraction, cfg.seed)
        pick = lambda seq, idx: [seq[i] for i in idx]

        X, y = _stage("select", stages.stack_labelled, pick(features, clf_idx), pick(sp_labels, clf_idx))
        self.discretizer_, self.selected_ = _stage("select", stages.select_features, X, y, m, cfg)
        self.classifier_ = _stage("train-clf", stages.train_classifiers, X, y, self.selected_, m, cfg)

        # priors seen by the fusion fit come from the classifier slice only
        fit_priors = _stage("prior", stages.build_priors, pick(spmaps, clf_idx),
                            pick(sp_labels, clf_idx), m, cfg)
        self.fusion_ = _stage("train-fusion", stages.train_fusion, pick(spmaps, fus_idx),
                              pick(features, fus_idx), pick(sp_labels, fus_idx),
                              self.classifier_, *fit_priors, m, cfg)
        self.global_prior_, self.local_prior_ = _stage("prior", stages.build_priors, spmaps,
                                                       sp_labels, m, cfg)
        return self

    def parse(self, image, fusion: FusionModel | None = None) -> ParseResult:
        check_is_fitted(self, "fusion_")
        image = np.asarray(image)
        cfg = self.config
        spmap = stages.segment_images([image], cfg)[0]
        X = stages.extract_all([image], [spmap], self.codebooks_, cfg)[0]
        pv = self.classifier_.predict_proba(X)
        pl, pg = stages.context_probabilities(spmap, pv, self.global_prior_, self.local_prior_, cfg)
        fused = fuse(fusion or self.fusion_, pv, pl, pg)
        sp_lab = final_label(fused)
        return ParseResult(
            labels=sp_lab[spmap.ids],
            visual_labels=np.argmax(pv, axis=1)[spmap.ids],
            spmap=spmap, visual=pv, local=pl, global_=pg, fused=fused,
            superpixel_labels=sp_lab,
        )

    def predict(self, images):
        return [self.parse(img).labels for img in images]

    def evaluate(self, images, label_maps) -> tuple[Metrics, Metrics]:
        """``(fused, visual_only)`` metrics on labelled images."""
        results = [self.parse(img) for img in images]
        fused = evaluate([r.labels for r in results], label_maps, self.n_classes)
        visual = evaluate([r.visual_labels for r in results], label_maps, self.n_classes)
        return fused, visual

    def score(self, images, label_maps) -> float:
        return evaluate(self.predict(images), label_maps, self.n_classes).global_accuracy

    def save(self, directory, classes=None) -> ArtifactStore:
        check_is_fitted(self, "fusion_")
        store = ArtifactStore(directory)
        store.save_config(self.config, classes or [str(i) for i in range(self.n_classes)])
        store.save_codebooks(*self.codebooks_)
        store.save_selection(self.discretizer_, self.selected_)
        store.save_classifier(self.classifier_)
        store.save_priors(self.global_prior_, self.local_prior_)
        store.save_fusion(self.fusion_)
        return store

    @classmethod
    def load(cls, directory) -> "SceneParser":
        store = ArtifactStore(directory)
        cfg = store.load_config()
        classes = store.load_classes()
        parser = cls.from_config(cfg, len(classes))
        parser.codebooks_ = store.load_codebooks()
        parser.discretizer_, parser.selected_ = store.load_selection()
        parser.classifier_ = store.load_classifier(len(classes))
        parser.global_prior_, parser.local_prior_ = store.load_priors()
        parser.fusion_ = store.load_fusion()
        return parser
