"""Convenience wrapper shared by the CLI and single-fit experiment."""

import time

from .model import Hyperparams, fit
from .tuning import select_lambda_a

_WARM_SWEEPS = 30


def fit_with_auto_lambda_a(x, lambda_z, lambda_a, lambda_e, p2, p3,
                           max_sweeps=200, rel_tol=1e-6, anomaly_enabled=True):
    """Fit the model; a missing lambda_a is Otsu-selected from the
    residuals of an anomaly-off warm-start fit.

    Returns (state, hyperparams, wall_seconds).
    """
    t0 = time.perf_counter()
    if lambda_a is None and anomaly_enabled:
        h_warm = Hyperparams(
            lambda_z=lambda_z, lambda_a=1.0, lambda_e=lambda_e, p2=p2, p3=p3,
            max_sweeps=min(max_sweeps, _WARM_SWEEPS), rel_tol=rel_tol,
            anomaly_enabled=False,
        )
        warm = fit(x, h_warm)
        lambda_a = select_lambda_a(x, warm.model, lambda_e)
    elif lambda_a is None:
        lambda_a = 1.0  # unused when the anomaly term is disabled
    h = Hyperparams(
        lambda_z=lambda_z, lambda_a=lambda_a, lambda_e=lambda_e, p2=p2, p3=p3,
        max_sweeps=max_sweeps, rel_tol=rel_tol, anomaly_enabled=anomaly_enabled,
    )
    state = fit(x, h)
    return state, h, time.perf_counter() - t0
