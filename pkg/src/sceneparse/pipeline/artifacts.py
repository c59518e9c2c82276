"""On-disk layout of trained artifacts.

::

    out_dir/
      config.txt                 RunConfig, key = value
      classes.txt                one class name per line
      codebook_texton.csv        100 rows of 17 values
      codebook_descriptor.csv    100 rows of 128 values
      thresholds.csv             per-feature mean,std
      selected_features.txt      "class_id: i1 ... i50"
      classifiers/class_XXX.txt  one logistic model per class
      global_prior.txt           "M K" then "c_hat c k1 k2 value"
      local_prior.csv            M x M
      fusion.csv                 per-class w_c,w_v,w_l,w_g
      segments/<stem>.txt        superpixel grids (CLI stages)
      features/<stem>.csv        feature matrices (CLI stages)
      features/<stem>.labels.txt superpixel majority labels (CLI stages)
"""
from __future__ import annotations

import os

import numpy as np

from ..classify import OneVsAllClassifier
from ..context import FusionModel
from ..exceptions import MissingArtifactError
from ..features import (
    N_FEATURES,
    Codebook,
    Discretizer,
    read_feature_matrix,
    read_selected_features,
    write_feature_matrix,
    write_selected_features,
)
from ..imgseg import read_superpixel_map, write_superpixel_map
from ..prior import GlobalPrior, LocalPrior
from .config import RunConfig


class ArtifactStore:
    def __init__(self, root):
        self.root = os.fspath(root)

    def path(self, *parts) -> str:
        return os.path.join(self.root, *parts)

    def ensure(self, *parts) -> str:
        d = self.path(*parts)
        os.makedirs(d, exist_ok=True)
        return d

    def require(self, *parts) -> str:
        p = self.path(*parts)
        if not os.path.exists(p):
            raise MissingArtifactError(f"missing artifact: {p}")
        return p

    # configuration
    def save_config(self, cfg: RunConfig, classes) -> None:
        self.ensure()
        cfg.to_file(self.path("config.txt"))
        with open(self.path("classes.txt"), "w") as fh:
            fh.write("\n".join(classes) + "\n")

    def load_config(self) -> RunConfig:
        return RunConfig.from_file(self.require("config.txt"))

    def load_classes(self) -> list:
        with open(self.require("classes.txt")) as fh:
            return [line.rstrip("\n") for line in fh if line.strip()]

    # codebooks
    def save_codebooks(self, texton: Codebook, descriptor: Codebook) -> None:
        self.ensure()
        texton.save(self.path("codebook_texton.csv"))
        descriptor.save(self.path("codebook_descriptor.csv"))

    def load_codebooks(self):
        return (Codebook.load(self.require("codebook_texton.csv"), "texton"),
                Codebook.load(self.require("codebook_descriptor.csv"), "descriptor"))

    # selection
    def save_selection(self, disc: Discretizer, selected) -> None:
        self.ensure()
        disc.save(self.path("thresholds.csv"))
        write_selected_features(self.path("selected_features.txt"), selected)

    def load_selection(self):
        return (Discretizer.load(self.require("thresholds.csv")),
                read_selected_features(self.require("selected_features.txt")))

    # classifiers
    def save_classifier(self, clf: OneVsAllClassifier) -> None:
        clf.save(self.ensure("classifiers"))

    def load_classifier(self, n_classes) -> OneVsAllClassifier:
        return OneVsAllClassifier.load(self.require("classifiers"), n_classes, N_FEATURES)

    # priors
    def save_priors(self, gprior: GlobalPrior, lprior: LocalPrior) -> None:
        self.ensure()
        gprior.save(self.path("global_prior.txt"))
        lprior.save(self.path("local_prior.csv"))

    def load_priors(self):
        return (GlobalPrior.load(self.require("global_prior.txt")),
                LocalPrior.load(self.require("local_prior.csv")))

    # fusion
    def save_fusion(self, model: FusionModel) -> None:
        self.ensure()
        model.save(self.path("fusion.csv"))

    def load_fusion(self) -> FusionModel:
        return FusionModel.load(self.require("fusion.csv"))

    # per-image intermediates
    def save_segments(self, stem, spmap) -> None:
        write_superpixel_map(os.path.join(self.ensure("segments"), f"{stem}.txt"), spmap)

    def load_segments(self, stem):
        return read_superpixel_map(self.require("segments", f"{stem}.txt"))

    def has_segments(self, stem) -> bool:
        return os.path.exists(self.path("segments", f"{stem}.txt"))

    def save_features(self, stem, matrix, sp_labels) -> None:
        d = self.ensure("features")
        write_feature_matrix(os.path.join(d, f"{stem}.csv"), matrix)
        np.savetxt(os.path.join(d, f"{stem}.labels.txt"), np.asarray(sp_labels)[None, :], fmt="%d")

    def load_features(self, stem):
        matrix = read_feature_matrix(self.require("features", f"{stem}.csv"))
        labels = np.loadtxt(self.require("features", f"{stem}.labels.txt"), dtype=np.int64, ndmin=1)
        return matrix, labels
