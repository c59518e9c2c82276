"""Superpixel visual features, codebooks and class-specific feature selection."""
from .codebook import Codebook, build_codebook, fit_codebook, sample_descriptors
from .extract import N_FEATURES, extract_features, read_feature_matrix, write_feature_matrix
from .selection import (
    ClassSpecificMRMR,
    Discretizer,
    discretize,
    mrmr_select,
    mutual_information,
    read_selected_features,
    write_selected_features,
)

__all__ = [
    "Codebook",
    "build_codebook",
    "fit_codebook",
    "sample_descriptors",
    "N_FEATURES",
    "extract_features",
    "read_feature_matrix",
    "write_feature_matrix",
    "ClassSpecificMRMR",
    "Discretizer",
    "discretize",
    "mrmr_select",
    "mutual_information",
    "read_selected_features",
    "write_selected_features",
]
