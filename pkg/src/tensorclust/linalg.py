"""Dense linear-algebra kernels used by the solver.

Thin wrappers around LAPACK via numpy/scipy that pin down the contracts
the rest of the package depends on: thin SVD, symmetric positive-definite
solves, symmetric eigendecomposition with ascending eigenvalues, and QR
orthonormalization with a deterministic sign convention.
"""

from dataclasses import dataclass

import numpy as np


class LinearAlgebraError(RuntimeError):
    """A kernel failed (non-convergence, non-PD system, rank deficiency)."""


@dataclass(frozen=True)
class SvdThin:
    u: np.ndarray        # (m, r)
    s: np.ndarray        # (r,), descending, nonnegative
    vt: np.ndarray       # (r, n)


@dataclass(frozen=True)
class SymEig:
    values: np.ndarray   # ascending
    vectors: np.ndarray  # orthonormal columns, vectors[:, i] pairs with values[i]


def svd_thin(a):
    """Thin SVD with r = min(m, n) singular triplets."""
    a = np.asarray(a, dtype=np.float64)
    try:
        u, s, vt = np.linalg.svd(a, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise LinearAlgebraError(f"SVD did not converge: {exc}") from exc
    return SvdThin(u=u, s=s, vt=vt)


def solve_spd(a, b):
    """Solve a @ x = b for symmetric positive-definite ``a``.

    A Cholesky factorization certifies positive-definiteness first, so a
    non-PD system raises instead of silently returning a least-squares-ish
    answer.  Stays on numpy's LAPACK; mixing numpy and scipy BLAS pools
    stalls badly on low-core machines.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    try:
        np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise LinearAlgebraError(f"matrix is not positive-definite: {exc}") from exc
    return np.linalg.solve(a, b)


def sym_eig(a, sym_tol=1e-10):
    """Full eigendecomposition of a symmetric matrix, eigenvalues ascending."""
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    if asym > sym_tol * scale:
        raise ValueError(f"matrix is not symmetric (max asymmetry {asym:.3e})")
    try:
        values, vectors = np.linalg.eigh((a + a.T) / 2.0)
    except np.linalg.LinAlgError as exc:
        raise LinearAlgebraError(f"eigendecomposition did not converge: {exc}") from exc
    return SymEig(values=values, vectors=vectors)


def qr_orthonormalize(a, rank_tol=1e-10):
    """Orthonormal basis of the column span of ``a`` (m x n, m >= n).

    Signs are fixed so the R factor has a positive diagonal, which makes
    the result deterministic across LAPACK builds.
    """
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a matrix, got ndim={a.ndim}")
    m, n = a.shape
    if m < n:
        raise ValueError(f"need at least as many rows as columns, got {a.shape}")
    q, r = np.linalg.qr(a)
    diag = np.diagonal(r)
    norms = np.linalg.norm(a, axis=0)
    if np.any(np.abs(diag) <= rank_tol * np.maximum(norms, 1e-300)):
        raise LinearAlgebraError("matrix is numerically rank deficient")
    signs = np.where(diag < 0, -1.0, 1.0)
    return q * signs
