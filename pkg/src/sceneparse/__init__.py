"""Superpixel scene parsing with block-constrained class co-occurrence priors."""
from .exceptions import (
    InsufficientDataError,
    InvalidInputError,
    InvalidModelError,
    MissingArtifactError,
    SceneParseError,
)
from .pipeline import RunConfig, SceneParser

__version__ = "0.1.0"

__all__ = [
    "InsufficientDataError",
    "InvalidInputError",
    "InvalidModelError",
    "MissingArtifactError",
    "SceneParseError",
    "RunConfig",
    "SceneParser",
]
