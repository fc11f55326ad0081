"""Vector-space distortion and distribution metrics.

mse/nmse play the distortion role, sliced 2-Wasserstein and unbiased MMD^2
the distribution role.  Both distribution estimators take explicit
randomness (projection directions) or none (MMD), so reported numbers are
reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError


@dataclass(frozen=True)
class MetricReport:
    mse: float
    nmse: float
    sw2: float
    mmd2: float


def mse(a, b) -> float:
    """Mean squared componentwise difference."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ParameterError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.mean((a - b) ** 2))


def sliced_w2(x, y, n_projections, rng) -> float:
    """Sliced 2-Wasserstein distance between two equal-size sample batches.

    Averages, over random unit directions, the squared 1-D distance between
    sorted projections, then takes the square root.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    if x.size == 0 or y.size == 0:
        raise ParameterError("batches must be non-empty")
    if x.shape[1] != y.shape[1]:
        raise ParameterError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if x.shape[0] != y.shape[0]:
        raise ParameterError(
            f"sorted-projection pairing needs equal batch sizes, got {x.shape[0]} vs {y.shape[0]}"
        )
    if n_projections < 1:
        raise ParameterError(f"need at least one projection, got {n_projections}")
    d = x.shape[1]
    dirs = rng.standard_normal((int(n_projections), d))
    norms = np.linalg.norm(dirs, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    dirs /= norms
    px = np.sort(x @ dirs.T, axis=0)
    py = np.sort(y @ dirs.T, axis=0)
    return float(np.sqrt(np.mean((px - py) ** 2)))


def median_bandwidth(x, y) -> float:
    """Median pairwise distance over the pooled batch (bandwidth heuristic)."""
    pooled = np.vstack([np.atleast_2d(x), np.atleast_2d(y)])
    sq = _pairwise_sq_dists(pooled, pooled)
    iu = np.triu_indices(pooled.shape[0], k=1)
    med = float(np.median(np.sqrt(sq[iu])))
    return med if med > 0.0 else 1.0


def mmd2_unbiased(x, y, bandwidth=None) -> float:
    """Unbiased squared MMD with a Gaussian kernel exp(-||a-b||^2 / 2h^2).

    U-statistic form; can be slightly negative under the null by
    construction.  bandwidth=None uses the pooled median heuristic.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.atleast_2d(np.asarray(y, dtype=float))
    n, m = x.shape[0], y.shape[0]
    if n < 2 or m < 2:
        raise ParameterError(f"need at least 2 samples per batch, got {n} and {m}")
    if x.shape[1] != y.shape[1]:
        raise ParameterError(f"dimension mismatch: {x.shape[1]} vs {y.shape[1]}")
    if bandwidth is None:
        bandwidth = median_bandwidth(x, y)
    if bandwidth <= 0:
        raise ParameterError(f"bandwidth must be positive, got {bandwidth}")
    h2 = 2.0 * bandwidth * bandwidth
    kxx = np.exp(-_pairwise_sq_dists(x, x) / h2)
    kyy = np.exp(-_pairwise_sq_dists(y, y) / h2)
    kxy = np.exp(-_pairwise_sq_dists(x, y) / h2)
    np.fill_diagonal(kxx, 0.0)
    np.fill_diagonal(kyy, 0.0)
    return float(
        kxx.sum() / (n * (n - 1)) + kyy.sum() / (m * (m - 1)) - 2.0 * kxy.mean()
    )


def _pairwise_sq_dists(a, b):
    aa = np.sum(a * a, axis=1)[:, None]
    bb = np.sum(b * b, axis=1)[None, :]
    sq = aa + bb - 2.0 * (a @ b.T)
    np.maximum(sq, 0.0, out=sq)
    return sq


def metric_report(decoded, source_batch, rng, n_projections=128, bandwidth=None) -> MetricReport:
    """Distortion + distribution metrics of a decoded batch against its source."""
    m = mse(decoded, source_batch)
    per_dim_var = float(np.mean(np.var(source_batch, axis=0)))
    nmse = m / per_dim_var if per_dim_var > 0 else float("inf")
    return MetricReport(
        mse=m,
        nmse=nmse,
        sw2=sliced_w2(decoded, source_batch, n_projections, rng),
        mmd2=mmd2_unbiased(decoded, source_batch, bandwidth),
    )
