"""Lower-orthant probabilities of a centred multivariate normal.

Separation-of-variables transform with randomly scrambled Sobol point sets.
The error estimate is the spread of the independent scramblings, so a fixed
seed gives a fixed answer.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import ndtr, ndtri
from scipy.stats import qmc

N_SCRAMBLES = 8
MIN_LOG2_POINTS = 8
MAX_LOG2_POINTS = 16
ERROR_FACTOR = 3.0


class CdfAccuracyError(ArithmeticError):
    """The requested absolute tolerance was not reached within the point budget."""


@lru_cache(maxsize=64)
def _point_sets(dim: int, log2_points: int, seed: int) -> tuple[np.ndarray, ...]:
    seeds = np.random.SeedSequence(seed).spawn(N_SCRAMBLES)
    out = []
    for ss in seeds:
        engine = qmc.Sobol(dim, scramble=True, seed=np.random.default_rng(ss))
        pts = engine.random_base2(log2_points)
        pts.setflags(write=False)
        out.append(pts)
    return tuple(out)


def _sov_integrand(chol: np.ndarray, upper: np.ndarray, w: np.ndarray) -> np.ndarray:
    m = len(upper)
    n = w.shape[0]
    y = np.empty((n, m))
    e = np.full(n, ndtr(upper[0] / chol[0, 0]))
    f = e.copy()
    for i in range(1, m):
        p = np.clip(w[:, i - 1] * e, 1e-300, 1.0 - 1e-16)
        y[:, i - 1] = ndtri(p)
        shift = y[:, :i] @ chol[i, :i]
        e = ndtr((upper[i] - shift) / chol[i, i])
        f *= e
    return f


def orthant_probability(
    corr: np.ndarray,
    upper: np.ndarray,
    *,
    tol: float = 5e-4,
    seed: int = 0,
    max_log2_points: int = MAX_LOG2_POINTS,
) -> tuple[float, float]:
    """P(Z <= upper) for Z ~ N(0, corr); returns ``(value, error_estimate)``.

    ``upper`` may hold ``+inf`` (dimension integrated out) or ``-inf``
    (probability zero).
    """
    upper = np.asarray(upper, dtype=float)
    if np.any(upper == -np.inf):
        return 0.0, 0.0
    keep = np.isfinite(upper)
    if not keep.any():
        return 1.0, 0.0
    corr = np.asarray(corr, dtype=float)[np.ix_(keep, keep)]
    upper = upper[keep]
    m = len(upper)
    if m == 1:
        return float(ndtr(upper[0])), 0.0
    try:
        chol = np.linalg.cholesky(corr)
    except np.linalg.LinAlgError:
        chol = np.linalg.cholesky(corr + 1e-10 * np.eye(m))

    err = np.inf
    value = np.nan
    for log2_points in range(MIN_LOG2_POINTS, max_log2_points + 1):
        means = np.array([
            _sov_integrand(chol, upper, w).mean()
            for w in _point_sets(m - 1, log2_points, seed)
        ])
        value = float(means.mean())
        err = ERROR_FACTOR * float(means.std(ddof=1)) / np.sqrt(N_SCRAMBLES)
        if err <= tol:
            return value, err
    raise CdfAccuracyError(
        f"normal orthant probability {value:.6g} has error estimate {err:.3g} > tol {tol:g} "
        f"after 2^{max_log2_points} points per scramble"
    )
