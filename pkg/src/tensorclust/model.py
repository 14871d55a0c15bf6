"""Joint low-rank, sparse-anomaly, self-expression model of an order-3 tensor.

The model splits a data tensor ``x`` (samples along mode 1) into a partial
Tucker part ``core x2 u2 x3 u3`` with orthonormal factors on the
non-clustering modes, an entrywise-sparse anomaly tensor, and an N x N
self-expression matrix ``z`` that reconstructs each core sample from the
others.  Fitting minimizes

    0.5*||z||_F^2
    + 0.5*lambda_z*||core - core x1 z||_F^2
    + lambda_a*||anomaly||_1
    + 0.5*lambda_e*||x - anomaly - core x2 u2 x3 u3||_F^2

subject to u2, u3 having orthonormal columns, by cycling through the five
blocks; every block update is the exact minimizer of its subproblem, so
the objective never increases.
"""

from dataclasses import dataclass, field

import numpy as np

from .linalg import solve_spd, svd_thin
from .tensor_ops import fold, frobenius_norm_sq, l1_norm, mode_product, unfold


class SolverError(RuntimeError):
    """Fit failed (non-finite objective or a kernel failure)."""


@dataclass(frozen=True)
class Hyperparams:
    lambda_z: float
    lambda_a: float
    lambda_e: float
    p2: int
    p3: int
    max_sweeps: int = 200
    rel_tol: float = 1e-6
    anomaly_enabled: bool = True

    def __post_init__(self):
        for name in ("lambda_z", "lambda_a", "lambda_e"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive, got {getattr(self, name)}")
        if self.p2 < 1 or self.p3 < 1:
            raise ValueError(f"target ranks must be >= 1, got ({self.p2}, {self.p3})")
        if self.max_sweeps < 1:
            raise ValueError("max_sweeps must be >= 1")
        if not self.rel_tol > 0:
            raise ValueError("rel_tol must be positive")


@dataclass
class FactorModel:
    core: np.ndarray  # (N, P2, P3)
    u2: np.ndarray    # (I2, P2), orthonormal columns
    u3: np.ndarray    # (I3, P3), orthonormal columns

    def reconstruct(self):
        """Low-rank part: core x2 u2 x3 u3."""
        return mode_product(mode_product(self.core, self.u2, 2), self.u3, 3)


@dataclass
class FitState:
    model: FactorModel
    anomaly: np.ndarray            # (N, I2, I3)
    z: np.ndarray                  # (N, N)
    objective_trace: list = field(default_factory=list)
    sweeps_run: int = 0
    converged: bool = False


def objective(x, s, h):
    """Full objective value at state ``s``."""
    x = np.asarray(x)
    resid = x - s.anomaly - s.model.reconstruct()
    self_expr = s.model.core - mode_product(s.model.core, s.z, 1)
    return (
        0.5 * frobenius_norm_sq(s.z)
        + 0.5 * h.lambda_z * frobenius_norm_sq(self_expr)
        + h.lambda_a * l1_norm(s.anomaly)
        + 0.5 * h.lambda_e * frobenius_norm_sq(resid)
    )


def init_state(x, h):
    """Warm start: zero anomaly, identity z, truncated-HOSVD factors.

    u2/u3 are the leading left singular vectors of the mode-2/mode-3
    unfoldings; the core is the projection of x onto them.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 3:
        raise ValueError(f"expected an order-3 tensor, got ndim={x.ndim}")
    n, i2, i3 = x.shape
    if not (1 <= h.p2 <= i2) or not (1 <= h.p3 <= i3):
        raise ValueError(
            f"target ranks ({h.p2}, {h.p3}) out of bounds for dims ({i2}, {i3})"
        )
    u2 = svd_thin(unfold(x, 2)).u[:, : h.p2]
    u3 = svd_thin(unfold(x, 3)).u[:, : h.p3]
    core = mode_product(mode_product(x, u2.T, 2), u3.T, 3)
    return FitState(
        model=FactorModel(core=core, u2=u2, u3=u3),
        anomaly=np.zeros_like(x),
        z=np.eye(n),
    )


def update_z(core, h):
    """Minimize 0.5*||z||^2 + 0.5*lambda_z*||C1 - z C1||^2 over z.

    Closed form z = lambda_z (I + lambda_z C1 C1^T)^{-1} (C1 C1^T) with
    C1 the mode-1 unfolding of the core.
    """
    c1 = unfold(np.asarray(core), 1)
    gram = c1 @ c1.T
    n = gram.shape[0]
    return solve_spd(np.eye(n) + h.lambda_z * gram, h.lambda_z * gram)


def update_anomaly(x, model, h):
    """Soft-threshold the reconstruction residual at lambda_a / lambda_e.

    Returns the zero tensor when the anomaly term is disabled.
    """
    x = np.asarray(x)
    if not h.anomaly_enabled:
        return np.zeros_like(x)
    resid = x - model.reconstruct()
    thr = h.lambda_a / h.lambda_e
    return np.sign(resid) * np.maximum(0.0, np.abs(resid) - thr)


def update_core(x, a, z, u2, u3, h):
    """Minimize the core subproblem; closed form via an SPD solve.

    C1 = lambda_e (lambda_z (I-z)^T (I-z) + lambda_e I)^{-1} M P^T where
    M = X1 - A1 and M P^T is computed implicitly as the mode-wise
    projection (x - a) x2 u2^T x3 u3^T.  Requires u2, u3 orthonormal.
    """
    x = np.asarray(x)
    n = x.shape[0]
    p2, p3 = u2.shape[1], u3.shape[1]
    mp = unfold(mode_product(mode_product(x - a, u2.T, 2), u3.T, 3), 1)
    iz = np.eye(n) - z
    lhs = h.lambda_z * (iz.T @ iz) + h.lambda_e * np.eye(n)
    c1 = h.lambda_e * solve_spd(lhs, mp)
    return fold(c1, 1, (n, p2, p3))


def update_factor(x, a, core, other_u, mode):
    """Orthonormal factor update for mode 2 or 3 (Procrustes step).

    Builds Q = (X-A)_(m) (other_u kron I_N) C_(m)^T implicitly through a
    mode product, then returns u_hat @ v_hat^T from the thin SVD of Q.
    """
    if mode not in (2, 3):
        raise ValueError(f"mode must be 2 or 3, got {mode!r}")
    resid = np.asarray(x) - a
    other_mode = 3 if mode == 2 else 2
    projected = mode_product(resid, other_u.T, other_mode)
    q = unfold(projected, mode) @ unfold(core, mode).T
    dec = svd_thin(q)
    return dec.u @ dec.vt


def fit(x, h):
    """Block coordinate descent per sweep: z, anomaly, core, u2, u3.

    Stops when the relative objective decrease falls below ``h.rel_tol``
    or after ``h.max_sweeps`` sweeps.
    """
    state = init_state(x, h)
    state.objective_trace.append(objective(x, state, h))
    for sweep in range(1, h.max_sweeps + 1):
        state.z = update_z(state.model.core, h)
        state.anomaly = update_anomaly(x, state.model, h)
        state.model.core = update_core(
            x, state.anomaly, state.z, state.model.u2, state.model.u3, h
        )
        state.model.u2 = update_factor(x, state.anomaly, state.model.core, state.model.u3, 2)
        state.model.u3 = update_factor(x, state.anomaly, state.model.core, state.model.u2, 3)
        obj = objective(x, state, h)
        if not np.isfinite(obj):
            raise SolverError(
                f"objective became non-finite ({obj}) at sweep {sweep}; "
                f"lambda_z={h.lambda_z}, lambda_a={h.lambda_a}, lambda_e={h.lambda_e}"
            )
        prev = state.objective_trace[-1]
        state.objective_trace.append(obj)
        state.sweeps_run = sweep
        if abs(prev - obj) <= h.rel_tol * max(abs(prev), 1e-30):
            state.converged = True
            break
    return state
