"""Synthetic clustered-tensor generator with planted sparse anomalies.

Each cluster k gets its own Gaussian factor pair spanning a rank-P_l
subspace per non-clustering mode, and a standard-normal core; sample
slices are stacked along mode 1, i.i.d. Gaussian noise is added
entrywise, and a Bernoulli(p) support of entries is shifted by the
anomaly intensity.

Factor entries are N(0, 1/P_l), which makes the low-rank signal have
unit variance per tensor entry regardless of the ambient or intrinsic
dimensions.  Anomaly intensities of a few units are then gross relative
to the signal but not so large that every method trivially ignores
them, which is the corruption regime the benchmark sweep probes.

A single seeded generator is consumed in a fixed, documented order so a
seed pins the data bit-exactly: per-cluster factors (mode 2 then mode 3,
cluster by cluster), per-cluster cores, noise, anomaly support.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .tensor_ops import mode_product


@dataclass(frozen=True)
class SimConfig:
    k_clusters: int = 3
    n_per_cluster: int = 30
    ambient_dims: tuple = (50, 50)
    intrinsic_dims: tuple = (5, 5)
    noise_sigma: float = 0.5
    anomaly_ratio: float = 0.1
    anomaly_intensity: float = 4.0
    seed: int = 0
    keep_clean: bool = False

    def __post_init__(self):
        if self.k_clusters < 1 or self.n_per_cluster < 1:
            raise ValueError("k_clusters and n_per_cluster must be positive")
        if len(self.ambient_dims) != 2 or len(self.intrinsic_dims) != 2:
            raise ValueError("ambient_dims and intrinsic_dims must be pairs")
        for amb, intr in zip(self.ambient_dims, self.intrinsic_dims):
            if intr < 1 or amb < intr:
                raise ValueError(
                    f"need 1 <= intrinsic <= ambient per mode, got {intr} vs {amb}"
                )
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be nonnegative")
        if not 0 <= self.anomaly_ratio < 1:
            raise ValueError("anomaly_ratio must lie in [0, 1)")


@dataclass
class SimData:
    x: np.ndarray                  # (K*N, I2, I3)
    truth_labels: np.ndarray       # (K*N,)
    anomaly_support: np.ndarray    # boolean, same shape as x
    clean: Optional[np.ndarray]    # pre-noise, pre-anomaly tensor if kept


def generate(cfg: SimConfig) -> SimData:
    rng = np.random.default_rng(cfg.seed)
    k, n = cfg.k_clusters, cfg.n_per_cluster
    i2, i3 = cfg.ambient_dims
    p2, p3 = cfg.intrinsic_dims

    factors = [
        (
            rng.standard_normal((i2, p2)) / np.sqrt(p2),
            rng.standard_normal((i3, p3)) / np.sqrt(p3),
        )
        for _ in range(k)
    ]
    cores = [rng.standard_normal((n, p2, p3)) for _ in range(k)]

    clean = np.concatenate(
        [mode_product(mode_product(c, u2, 2), u3, 3) for c, (u2, u3) in zip(cores, factors)],
        axis=0,
    )
    x = clean + rng.normal(0.0, cfg.noise_sigma, size=clean.shape)
    support = rng.random(clean.shape) < cfg.anomaly_ratio
    x = x + cfg.anomaly_intensity * support

    return SimData(
        x=x,
        truth_labels=np.repeat(np.arange(k), n),
        anomaly_support=support,
        clean=clean if cfg.keep_clean else None,
    )


def dimension_reduction_factor(ambient, intrinsic):
    """Geometric mean of ambient-over-intrinsic ratios on the non-clustering modes."""
    ambient = np.asarray(ambient, dtype=np.float64)
    intrinsic = np.asarray(intrinsic, dtype=np.float64)
    if np.any(ambient <= 0) or np.any(intrinsic <= 0):
        raise ValueError("dimensions must be positive")
    ratios = ambient / intrinsic
    return float(np.exp(np.mean(np.log(ratios))))
