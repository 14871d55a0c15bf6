"""Hyperparameter selection: Otsu threshold for the sparsity weight and
normalized-cut grid search for the ridge/reconstruction weights.

The anomaly weight maps to a soft-threshold level lambda_a / lambda_e, so
Otsu's two-class split of the warm-start residual magnitudes gives the
threshold directly and lambda_a = t * lambda_e.  The remaining weights
are picked by fitting every grid point and keeping the one whose affinity
graph has the smallest normalized-cut score.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .clustering import affinity_from_z, spectral_cluster
from .model import Hyperparams, fit

_OTSU_BINS = 256


class TuningError(RuntimeError):
    pass


@dataclass(frozen=True)
class GridSpec:
    lambda_z_values: tuple
    lambda_e_values: tuple
    lambda_a_values: tuple
    p2: int
    p3: int
    seed: int = 0
    max_sweeps: int = 200
    rel_tol: float = 1e-6

    def __post_init__(self):
        for name in ("lambda_z_values", "lambda_e_values", "lambda_a_values"):
            vals = getattr(self, name)
            if len(vals) == 0:
                raise ValueError(f"{name} must be nonempty")
            if any(v <= 0 for v in vals):
                raise ValueError(f"{name} must contain positive values")

    def cells(self):
        """Cell coordinates in deterministic lexicographic order."""
        return [
            (lz, le, la)
            for lz in self.lambda_z_values
            for le in self.lambda_e_values
            for la in self.lambda_a_values
        ]


@dataclass
class GridCell:
    lambda_z: float
    lambda_e: float
    lambda_a: float
    nc_score: float = float("nan")
    labels: Optional[np.ndarray] = None
    converged: bool = False
    sweeps_run: int = 0
    error: Optional[str] = None


def otsu_threshold(values, bins=_OTSU_BINS):
    """Threshold minimizing intra-class variance over a histogram of values.

    Classes are the histogram bins below/above each candidate bin edge;
    ties break toward the smallest threshold.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size < 2 or np.min(values) == np.max(values):
        raise TuningError("Otsu threshold needs at least two distinct values")
    counts, edges = np.histogram(values, bins=bins)
    centers = (edges[:-1] + edges[1:]) / 2.0
    n0 = np.cumsum(counts)[:-1]                      # class sizes below edge k
    n1 = counts.sum() - n0
    m0 = np.cumsum(counts * centers)[:-1]
    m1 = (counts * centers).sum() - m0
    q0 = np.cumsum(counts * centers**2)[:-1]
    q1 = (counts * centers**2).sum() - q0
    with np.errstate(divide="ignore", invalid="ignore"):
        var0 = q0 / n0 - (m0 / n0) ** 2
        var1 = q1 / n1 - (m1 / n1) ** 2
        intra = (n0 * var0 + n1 * var1) / counts.sum()
    intra[(n0 == 0) | (n1 == 0)] = np.inf
    return float(edges[1:-1][np.argmin(intra)])


def select_lambda_a(x, model, lambda_e):
    """Pick lambda_a so the soft-threshold level equals the Otsu split of
    the warm-start reconstruction residual magnitudes."""
    resid = np.abs(np.asarray(x) - model.reconstruct())
    return otsu_threshold(resid) * lambda_e


def _evaluate_cell(x, coords, grid, k):
    lz, le, la = coords
    cell = GridCell(lambda_z=lz, lambda_e=le, lambda_a=la)
    try:
        h = Hyperparams(
            lambda_z=lz,
            lambda_a=la,
            lambda_e=le,
            p2=grid.p2,
            p3=grid.p3,
            max_sweeps=grid.max_sweeps,
            rel_tol=grid.rel_tol,
        )
        state = fit(x, h)
        result = spectral_cluster(affinity_from_z(state.z), k, grid.seed)
        cell.nc_score = result.nc_score
        cell.labels = result.labels
        cell.converged = state.converged
        cell.sweeps_run = state.sweeps_run
    except Exception as exc:  # recorded per-cell, excluded from the argmin
        cell.error = f"{type(exc).__name__}: {exc}"
    return cell


def grid_search(x, grid, k, n_jobs=1):
    """Fit every grid point and return (best Hyperparams, full cell table).

    The winner minimizes the normalized-cut score; ties break toward the
    lexicographically smaller (lambda_z, lambda_e, lambda_a).  Failed
    cells are recorded with their error and skipped.
    """
    coords = grid.cells()
    if n_jobs > 1:
        with ThreadPoolExecutor(max_workers=n_jobs) as pool:
            table = list(pool.map(lambda c: _evaluate_cell(x, c, grid, k), coords))
    else:
        table = [_evaluate_cell(x, c, grid, k) for c in coords]

    best = None
    for cell in table:
        if cell.error is not None:
            continue
        key = (cell.nc_score, cell.lambda_z, cell.lambda_e, cell.lambda_a)
        if best is None or key < (best.nc_score, best.lambda_z, best.lambda_e, best.lambda_a):
            best = cell
    if best is None:
        raise TuningError("every grid cell failed")
    chosen = Hyperparams(
        lambda_z=best.lambda_z,
        lambda_a=best.lambda_a,
        lambda_e=best.lambda_e,
        p2=grid.p2,
        p3=grid.p3,
        max_sweeps=grid.max_sweeps,
        rel_tol=grid.rel_tol,
    )
    return chosen, table
