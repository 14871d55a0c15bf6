"""Joint low-rank Tucker compression, sparse anomaly extraction, and
subspace clustering of order-3 tensors."""

from .baselines import baseline_kmeans, baseline_trr
from .clustering import (
    ClusterResult,
    ClusteringError,
    affinity_from_z,
    choose_k,
    clustering_accuracy,
    kmeans,
    normalized_cut,
    spectral_cluster,
)
from .linalg import LinearAlgebraError, qr_orthonormalize, solve_spd, svd_thin, sym_eig
from .model import (
    FactorModel,
    FitState,
    Hyperparams,
    SolverError,
    fit,
    init_state,
    objective,
    update_anomaly,
    update_core,
    update_factor,
    update_z,
)
from .pipeline import fit_with_auto_lambda_a
from .simulate import SimConfig, SimData, dimension_reduction_factor, generate
from .tensor_ops import fold, frobenius_norm_sq, kronecker, l1_norm, mode_product, unfold
from .tensorfile import TensorFileError, read_matrix, read_tensor, write_tensor
from .tuning import GridSpec, TuningError, grid_search, otsu_threshold, select_lambda_a

__version__ = "0.1.0"

__all__ = [
    "ClusterResult",
    "ClusteringError",
    "FactorModel",
    "FitState",
    "GridSpec",
    "Hyperparams",
    "LinearAlgebraError",
    "SimConfig",
    "SimData",
    "SolverError",
    "TensorFileError",
    "TuningError",
    "affinity_from_z",
    "baseline_kmeans",
    "baseline_trr",
    "choose_k",
    "clustering_accuracy",
    "dimension_reduction_factor",
    "fit",
    "fit_with_auto_lambda_a",
    "fold",
    "frobenius_norm_sq",
    "generate",
    "grid_search",
    "init_state",
    "kmeans",
    "kronecker",
    "l1_norm",
    "mode_product",
    "normalized_cut",
    "objective",
    "otsu_threshold",
    "qr_orthonormalize",
    "read_matrix",
    "read_tensor",
    "select_lambda_a",
    "solve_spd",
    "spectral_cluster",
    "svd_thin",
    "sym_eig",
    "unfold",
    "update_anomaly",
    "update_core",
    "update_factor",
    "update_z",
    "write_tensor",
]
