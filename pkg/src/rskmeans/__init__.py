"""Robust sparse K-means clustering and its ancestors (K-means, trimmed
K-means, sparse K-means), with evaluation metrics and simulation tools."""

from .data import DataMatrix, feature_dissimilarity, load_csv, per_feature_bcss, standardize_rows
from .engine import (
    TRIMMED,
    ClusterFit,
    FitOptions,
    Partition,
    assign_cases,
    kmeans,
    lloyd,
    rsk_means,
    sparse_kmeans,
    trimmed_kmeans,
    update_centers,
)
from .errors import (
    DataError,
    DegenerateObjectiveError,
    EmptyClusterError,
    FitError,
    ParseError,
    RSKError,
    ZeroScaleError,
)
from .metrics import average_precision, cer, evaluate, flag_outliers, silhouette
from .selection import ClestParams, calibrate_l1_bound, clest, clest_select_k
from .simulation import MODELS, ExperimentConfig, SimModel, generate_dataset, run_experiment
from .weights import WeightVector, soft_threshold, solve_weights

__version__ = "0.1.0"
