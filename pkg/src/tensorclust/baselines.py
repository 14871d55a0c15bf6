"""Benchmark baselines operating on mode-1 vectorized samples."""

import numpy as np

from .clustering import affinity_from_z, kmeans, spectral_cluster
from .linalg import solve_spd
from .tensor_ops import unfold


def baseline_kmeans(x, k, seed, restarts=20):
    """k-means on the flattened sample rows (Euclidean distance)."""
    rows = unfold(np.asarray(x), 1)
    labels, _ = kmeans(rows, k, seed, restarts=restarts)
    return labels


def baseline_trr(x, k, lam, keep, seed):
    """Thresholded ridge self-expression on the flattened samples.

    Solves the same ridge subproblem as the model's z update with the raw
    data rows in place of the core, keeps the ``keep`` largest-magnitude
    off-diagonal entries per row, then runs the spectral pipeline.
    """
    rows = unfold(np.asarray(x), 1)
    n = rows.shape[0]
    if not 0 < keep < n:
        raise ValueError(f"keep must be in 1..{n - 1}, got {keep}")
    gram = rows @ rows.T
    z = solve_spd(np.eye(n) + lam * gram, lam * gram)
    np.fill_diagonal(z, 0.0)
    kept = np.zeros_like(z)
    for i in range(n):
        idx = np.argpartition(-np.abs(z[i]), keep - 1)[:keep]
        kept[i, idx] = z[i, idx]
    return spectral_cluster(affinity_from_z(kept), k, seed).labels
