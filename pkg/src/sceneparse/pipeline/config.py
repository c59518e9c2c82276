"""Run configuration and its flat ``key = value`` file format."""
from __future__ import annotations

import dataclasses
import os
from dataclasses import dataclass, fields

from ..exceptions import InvalidInputError, MissingArtifactError


@dataclass
class RunConfig:
    # segmentation
    sigma: float = 0.8
    min_size: int = 100
    k_base: float = 200.0
    k_reference: float = 640.0
    # spatial blocks
    blocks_x: int = 6
    blocks_y: int = 6
    # features
    n_selected: int = 50
    codebook_size: int = 100
    texton_budget: int = 20000
    descriptor_budget: int = 20000
    descriptor_stride: int = 8
    dilation_radius: int = 10
    # classifiers
    clf_alpha: float = 1e-3
    clf_max_iter: int = 5000
    clf_tol: float = 1e-6
    # priors and fusion
    prior_alpha: float = 1.0
    fusion_fraction: float = 0.2
    fusion_tol: float = 1e-8
    # run
    seed: int = 42
    folds: int = 5
    n_jobs: int = 1

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        if not os.path.exists(path):
            raise MissingArtifactError(f"config file not found: {path}")
        types = {f.name: f.type for f in fields(cls)}
        values = {}
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                key, sep, value = (part.strip() for part in line.partition("="))
                if not sep:
                    raise InvalidInputError(f"{path}:{lineno}: expected 'key = value'")
                if key not in types:
                    raise InvalidInputError(f"{path}:{lineno}: unknown config key {key!r}")
                conv = int if types[key] in (int, "int") else float
                try:
                    values[key] = conv(value)
                except ValueError as exc:
                    raise InvalidInputError(f"{path}:{lineno}: bad value for {key}: {value!r}") from exc
        return cls(**values)

    def to_file(self, path) -> None:
        with open(path, "w") as fh:
            for f in fields(self):
                fh.write(f"{f.name} = {getattr(self, f.name)!r}\n")
