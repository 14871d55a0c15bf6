"""From self-expression matrix to cluster labels and quality scores.

Pipeline: symmetrize z into a nonnegative hollow affinity, embed with the
k smallest eigenvectors of the symmetric-normalized Laplacian
L_sym = I - D^{-1/2} W D^{-1/2} (rows unit-normalized), then k-means.
Cluster count can be chosen from the largest log-eigengap of L_sym.
"""

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg import sym_eig


class ClusteringError(RuntimeError):
    pass


@dataclass
class ClusterResult:
    labels: np.ndarray       # (N,), values in 0..k-1
    k: int
    eigenvalues: np.ndarray  # ascending L_sym spectrum
    nc_score: float


def affinity_from_z(z):
    """Nonnegative symmetric affinity |z + z^T| with zeroed diagonal.

    The absolute value keeps ridge-regression self-expression weights
    (which may be negative) usable as graph edge weights.
    """
    z = np.asarray(z, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] != z.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {z.shape}")
    w = np.abs(z + z.T)
    np.fill_diagonal(w, 0.0)
    return w


def _sym_laplacian(w):
    n = w.shape[0]
    deg = w.sum(axis=1)
    inv_sqrt = np.where(deg > 0, 1.0 / np.sqrt(np.where(deg > 0, deg, 1.0)), 0.0)
    lap = np.eye(n) - (inv_sqrt[:, None] * w) * inv_sqrt[None, :]
    return lap, deg


def laplacian_spectrum(w):
    """Ascending eigenvalues of L_sym, clipped at 0 (L_sym is PSD)."""
    lap, _ = _sym_laplacian(np.asarray(w, dtype=np.float64))
    return np.maximum(sym_eig(lap).values, 0.0)


def _kmeans_plusplus(points, k, rng):
    n = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(n)]
    d2 = np.sum((points - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total > 0:
            idx = rng.choice(n, p=d2 / total)
        else:
            idx = rng.integers(n)
        centers[j] = points[idx]
        d2 = np.minimum(d2, np.sum((points - centers[j]) ** 2, axis=1))
    return centers


def _pairwise_sq_dists(points, centers):
    d = (
        np.sum(points**2, axis=1)[:, None]
        - 2.0 * points @ centers.T
        + np.sum(centers**2, axis=1)[None, :]
    )
    return np.maximum(d, 0.0)


def _lloyd(points, centers, max_iter):
    labels = np.full(points.shape[0], -1)
    for _ in range(max_iter):
        d = _pairwise_sq_dists(points, centers)
        new_labels = np.argmin(d, axis=1)  # ties go to the lowest centroid index
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(centers.shape[0]):
            members = points[labels == j]
            if members.shape[0] > 0:
                centers[j] = members.mean(axis=0)
    inertia = float(np.sum(np.min(_pairwise_sq_dists(points, centers), axis=1)))
    return labels, inertia


def kmeans(points, k, seed, restarts=20, max_iter=300):
    """k-means with k-means++ seeding; best of ``restarts`` runs by inertia."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k > n:
        raise ClusteringError(f"k={k} exceeds the number of samples {n}")
    if k < 1:
        raise ClusteringError(f"k must be >= 1, got {k}")
    rng = np.random.default_rng(seed)
    best_labels, best_inertia = None, np.inf
    for _ in range(restarts):
        centers = _kmeans_plusplus(points, k, rng)
        labels, inertia = _lloyd(points, centers, max_iter)
        if inertia < best_inertia:
            best_labels, best_inertia = labels, inertia
    return best_labels, best_inertia


def spectral_cluster(w, k, seed):
    """Cluster the affinity graph into k groups via the normalized Laplacian.

    Zero-degree nodes get a uniform embedding row.  If k-means leaves a
    cluster empty the run is retried once with a shifted seed.
    """
    w = np.asarray(w, dtype=np.float64)
    n = w.shape[0]
    if k > n:
        raise ClusteringError(f"k={k} exceeds the number of nodes {n}")
    lap, deg = _sym_laplacian(w)
    dec = sym_eig(lap)
    eigenvalues = np.maximum(dec.values, 0.0)
    embedding = dec.vectors[:, :k].copy()
    embedding[deg == 0] = 1.0 / np.sqrt(k)
    norms = np.linalg.norm(embedding, axis=1)
    zero_rows = norms == 0
    embedding[zero_rows] = 1.0 / np.sqrt(k)
    norms[zero_rows] = 1.0
    embedding /= norms[:, None]

    labels = None
    for attempt in range(2):
        cand, _ = kmeans(embedding, k, seed + attempt)
        if len(np.unique(cand)) == k:
            labels = cand
            break
    if labels is None:
        raise ClusteringError(f"k-means produced an empty cluster for k={k}")
    return ClusterResult(
        labels=labels,
        k=k,
        eigenvalues=eigenvalues,
        nc_score=normalized_cut(w, labels),
    )


def choose_k(w, k_max):
    """Cluster count at the largest eigengap of the L_sym spectrum.

    The first eigenvalue of L_sym is 0 for every graph, so a log-scale
    gap would always peak at k=1 on connected graphs; the plain gap
    lambda_{k+1} - lambda_k recovers the component count on disconnected
    graphs and the block count on noisy near-block-diagonal affinities.
    """
    if k_max < 2:
        raise ValueError(f"k_max must be >= 2, got {k_max}")
    vals = laplacian_spectrum(w)
    upper = min(k_max, len(vals))
    gaps = vals[1:upper] - vals[: upper - 1]
    return int(np.argmax(gaps)) + 1


def clustering_accuracy(pred, truth):
    """Best label-matching fraction over all label permutations.

    Exhaustive search up to 8 distinct labels, optimal assignment above.
    """
    pred = np.asarray(pred)
    truth = np.asarray(truth)
    if pred.shape != truth.shape or pred.ndim != 1:
        raise ValueError(f"label vectors must match, got {pred.shape} vs {truth.shape}")
    n = len(pred)
    _, pi = np.unique(pred, return_inverse=True)
    _, ti = np.unique(truth, return_inverse=True)
    k = max(pi.max(), ti.max()) + 1
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (pi, ti), 1)
    if k <= 8:
        best = max(
            sum(confusion[i, perm[i]] for i in range(k))
            for perm in itertools.permutations(range(k))
        )
    else:
        rows, cols = linear_sum_assignment(-confusion)
        best = confusion[rows, cols].sum()
    return float(best) / n


def normalized_cut(w, labels):
    """Sum over clusters of cut weight over total incident weight.

    Within-cluster weight counts each unordered pair once; a cluster with
    no incident weight contributes 0.
    """
    w = np.asarray(w, dtype=np.float64)
    labels = np.asarray(labels)
    if labels.shape[0] != w.shape[0]:
        raise ValueError("labels length does not match affinity size")
    score = 0.0
    for c in np.unique(labels):
        mask = labels == c
        w_out = float(w[mask][:, ~mask].sum())
        w_in = float(w[mask][:, mask].sum()) / 2.0
        total = w_in + w_out
        if total > 0:
            score += w_out / total
    return score
