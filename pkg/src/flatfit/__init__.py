"""Projective clustering by uniform sampling.

Fit ``k`` affine ``j``-flats to a point set, optionally trimming a fraction
of outliers, using symmetric sampling and recursive projection.
"""
from .cluster import ClusterConfig, ClusteringResult, GridConfig, assign_and_trim, run_clustering
from .errors import (
    DegenerateError,
    DimensionMismatchError,
    FlatfitError,
    InvalidParameterError,
    ParseError,
    ResourceLimitError,
)
from .fitting import FitConfig, FitResult, fit_single_flat, optimal_flat_tau2
from .geometry import Flat, distance_to_flat, power_objective, project_onto_flat
from .regular import coefficient_of_variation, fit_regular, regular_factor

__version__ = "0.1.0"

__all__ = [
    "ClusterConfig",
    "ClusteringResult",
    "DegenerateError",
    "DimensionMismatchError",
    "FitConfig",
    "FitResult",
    "Flat",
    "FlatfitError",
    "GridConfig",
    "InvalidParameterError",
    "ParseError",
    "ResourceLimitError",
    "assign_and_trim",
    "coefficient_of_variation",
    "distance_to_flat",
    "fit_regular",
    "fit_single_flat",
    "optimal_flat_tau2",
    "power_objective",
    "project_onto_flat",
    "regular_factor",
    "run_clustering",
]
