"""Dependence models over the unit hypercube.

Parameters with rank correlation of exactly +-1 are folded into comonotone
groups that move as one effective factor. Whatever dependence remains
between the groups is carried by a copula over one representative per group:
either the independence copula or a Gaussian copula.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from ._mvn import CdfAccuracyError, orthant_probability

__all__ = [
    "CdfAccuracyError",
    "Copula",
    "CornerDistribution",
    "DependenceError",
    "DependenceModel",
    "GaussianCopula",
    "IndependenceCopula",
    "build_dependence_model",
    "corner_codes",
    "corner_distribution",
    "expand_corners",
    "spearman_to_pearson",
]

log = logging.getLogger(__name__)

PERFECT = 1.0 - 1e-12
DEFAULT_CDF_TOL = 5e-4
DEFAULT_EXACT_LIMIT = 12


class DependenceError(ValueError):
    """Correlation input that cannot define a dependence model."""


def spearman_to_pearson(rho):
    """Pearson correlation of a Gaussian copula with the given Spearman correlation."""
    return 2.0 * np.sin(np.pi * np.asarray(rho, dtype=float) / 6.0)


class Copula:
    """Joint distribution on ``[0, 1]^dim`` with uniform marginals.

    Subclasses implement ``sample`` and ``_cdf_point``; ``cdf`` handles
    batching and the boundary rules shared by every copula.
    """

    kind = "abstract"
    dim: int

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def _cdf_point(self, u: np.ndarray) -> float:
        raise NotImplementedError

    def cdf(self, u) -> float | np.ndarray:
        u = np.asarray(u, dtype=float)
        single = u.ndim == 1
        pts = np.atleast_2d(u)
        if pts.shape[1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {pts.shape[1]}")
        if np.any((pts < 0) | (pts > 1)):
            raise ValueError("copula arguments must lie in [0, 1]")
        out = np.empty(len(pts))
        for i, row in enumerate(pts):
            out[i] = 0.0 if np.any(row == 0) else self._cdf_point(row)
        return float(out[0]) if single else out

    def to_dict(self) -> dict:
        return {"kind": self.kind, "dim": self.dim}


class IndependenceCopula(Copula):
    kind = "independence"

    def __init__(self, dim: int):
        self.dim = int(dim)

    def sample(self, count, rng):
        return rng.random((count, self.dim))

    def _cdf_point(self, u):
        return float(np.prod(u))

    def __repr__(self):
        return f"IndependenceCopula(dim={self.dim})"


class GaussianCopula(Copula):
    """Gaussian copula parameterised by a Pearson correlation matrix.

    The CDF is a normal orthant probability evaluated by randomized QMC to an
    absolute tolerance ``tol``; ``seed`` fixes the point sets so repeated
    calls agree exactly.
    """

    kind = "gaussian"

    def __init__(self, corr, *, tol: float = DEFAULT_CDF_TOL, seed: int = 0):
        corr = np.array(corr, dtype=float)
        if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
            raise DependenceError("correlation matrix must be square")
        _check_correlation_matrix(corr, "Pearson")
        eig = np.linalg.eigvalsh(corr)
        if eig.min() < -1e-10:
            raise DependenceError(
                f"correlation matrix is not positive semi-definite (min eigenvalue {eig.min():.3g})"
            )
        self.corr = corr
        self.corr.setflags(write=False)
        self.dim = corr.shape[0]
        self.tol = float(tol)
        self.seed = int(seed)
        w, v = np.linalg.eigh(corr)
        self._factor = v * np.sqrt(np.clip(w, 0.0, None))

    def sample(self, count, rng):
        z = rng.standard_normal((count, self.dim)) @ self._factor.T
        return ndtr(z)

    def _cdf_point(self, u):
        value, _ = orthant_probability(self.corr, ndtri(u), tol=self.tol, seed=self.seed)
        return min(max(value, 0.0), 1.0)

    def to_dict(self):
        return {
            "kind": self.kind,
            "dim": self.dim,
            "pearson": self.corr.tolist(),
            "tol": self.tol,
            "seed": self.seed,
        }

    def __repr__(self):
        return f"GaussianCopula(dim={self.dim}, tol={self.tol:g})"


def copula_from_dict(d: dict) -> Copula:
    if d["kind"] == "independence":
        return IndependenceCopula(d["dim"])
    if d["kind"] == "gaussian":
        return GaussianCopula(d["pearson"], tol=d.get("tol", DEFAULT_CDF_TOL), seed=d.get("seed", 0))
    raise DependenceError(f"unknown copula kind {d['kind']!r}")


def _check_correlation_matrix(corr: np.ndarray, label: str):
    if not np.allclose(corr, corr.T, atol=1e-12):
        raise DependenceError(f"{label} correlation matrix is not symmetric")
    if not np.allclose(np.diag(corr), 1.0, atol=1e-12):
        raise DependenceError(f"{label} correlation matrix must have a unit diagonal")
    if np.any(np.abs(corr) > 1.0 + 1e-12):
        raise DependenceError(f"{label} correlations must lie in [-1, 1]")


@dataclass(frozen=True)
class DependenceModel:
    """Comonotone groups plus a copula over the group representatives.

    ``groups[g]`` lists ``(parameter_index, sign)`` pairs; the first member
    always has sign +1 and is the group's representative.
    """

    groups: tuple[tuple[tuple[int, int], ...], ...]
    copula: Copula
    n_params: int = field(default=0)

    def __post_init__(self):
        if self.n_params == 0:
            object.__setattr__(self, "n_params", sum(len(g) for g in self.groups))
        seen = sorted(i for g in self.groups for i, _ in g)
        if seen != list(range(self.n_params)):
            raise DependenceError("every parameter must belong to exactly one group")
        for g in self.groups:
            if g[0][1] != 1:
                raise DependenceError("the first member of a group must have sign +1")
        if self.copula.dim != len(self.groups):
            raise DependenceError(
                f"copula dimension {self.copula.dim} != number of groups {len(self.groups)}"
            )

    @property
    def n_factors(self) -> int:
        return len(self.groups)

    def sample(self, count: int, rng: np.random.Generator) -> np.ndarray:
        """Copula draws over the effective factors, shape ``(count, n_factors)``."""
        return self.copula.sample(count, rng)

    def expand(self, u: np.ndarray) -> np.ndarray:
        """Map effective-factor uniforms to member-parameter uniforms."""
        u = np.atleast_2d(u)
        out = np.empty((u.shape[0], self.n_params))
        for g, members in enumerate(self.groups):
            for idx, sign in members:
                out[:, idx] = u[:, g] if sign > 0 else 1.0 - u[:, g]
        return out

    def cdf(self, u):
        return self.copula.cdf(u)

    def to_dict(self) -> dict:
        return {
            "groups": [[[i, s] for i, s in g] for g in self.groups],
            "copula": self.copula.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DependenceModel":
        groups = tuple(tuple((int(i), int(s)) for i, s in g) for g in d["groups"])
        return cls(groups, copula_from_dict(d["copula"]))


def build_dependence_model(
    corr,
    *,
    scale: str = "spearman",
    kind: str = "gaussian",
    tol: float = DEFAULT_CDF_TOL,
    seed: int = 0,
) -> DependenceModel:
    """Build the grouped dependence model from a correlation matrix.

    Parameters
    ----------
    corr : array_like
        Symmetric correlation matrix with unit diagonal.
    scale : {"spearman", "pearson"}
        How off-diagonal entries are read. Rank correlations are converted
        with ``2 sin(pi rho / 6)`` before entering the Gaussian copula.
    kind : {"gaussian", "independence"}
        ``"independence"`` discards the correlations altogether, giving the
        classic Morris setting with one factor per parameter.
    """
    corr = np.array(corr, dtype=float)
    if corr.ndim != 2 or corr.shape[0] != corr.shape[1]:
        raise DependenceError("correlation matrix must be square")
    _check_correlation_matrix(corr, scale)
    n = corr.shape[0]
    if scale not in ("spearman", "pearson"):
        raise DependenceError(f"unknown correlation scale {scale!r}")

    if kind == "independence":
        off = corr - np.eye(n)
        if np.any(off != 0):
            log.info("independence copula requested; ignoring %d correlations",
                     int(np.count_nonzero(np.triu(off))))
        return DependenceModel(tuple(((i, 1),) for i in range(n)), IndependenceCopula(n))
    if kind != "gaussian":
        raise DependenceError(f"unknown copula kind {kind!r}")

    groups = _comonotone_groups(corr)
    signs = {i: s for g in groups for i, s in g}
    reps = [g[0][0] for g in groups]
    group_of = {i: k for k, g in enumerate(groups) for i, _ in g}

    for a, b in itertools.combinations(range(n), 2):
        ga, gb = group_of[a], group_of[b]
        if ga == gb:
            continue
        expected = signs[a] * signs[b] * corr[reps[ga], reps[gb]]
        if abs(corr[a, b] - expected) > 1e-9:
            raise DependenceError(
                f"correlation ({a}, {b}) = {corr[a, b]:g} conflicts with the comonotone "
                f"groups, which imply {expected:g}"
            )

    residual = corr[np.ix_(reps, reps)]
    if np.any(np.abs(residual - np.eye(len(reps))) >= PERFECT):
        raise DependenceError("perfect correlations must be resolved into groups")
    if scale == "spearman":
        residual = spearman_to_pearson(residual)
        np.fill_diagonal(residual, 1.0)
    eig = np.linalg.eigvalsh(residual)
    if eig.min() < -1e-10:
        raise DependenceError(
            f"residual correlation matrix is not positive semi-definite "
            f"(min eigenvalue {eig.min():.3g})"
        )
    m = len(groups)
    if np.allclose(residual, np.eye(m), atol=0.0):
        copula: Copula = IndependenceCopula(m)
    else:
        copula = GaussianCopula(residual, tol=tol, seed=seed)
    return DependenceModel(groups, copula, n)


def _comonotone_groups(corr: np.ndarray) -> tuple[tuple[tuple[int, int], ...], ...]:
    n = corr.shape[0]
    perfect = np.abs(corr) >= PERFECT
    assigned: dict[int, int] = {}
    groups = []
    for root in range(n):
        if root in assigned:
            continue
        sign = {root: 1}
        stack = [root]
        while stack:
            a = stack.pop()
            for b in np.flatnonzero(perfect[a]):
                b = int(b)
                if b == a:
                    continue
                s = sign[a] * (1 if corr[a, b] > 0 else -1)
                if b in sign:
                    if sign[b] != s:
                        raise DependenceError(
                            f"inconsistent perfect correlations around parameters {a} and {b}"
                        )
                    continue
                sign[b] = s
                stack.append(b)
        members = sorted(sign)
        for a, b in itertools.combinations(members, 2):
            if abs(corr[a, b] - sign[a] * sign[b]) > 1e-9:
                raise DependenceError(
                    f"inconsistent perfect correlations: parameters {a} and {b} are in one "
                    f"comonotone group but have correlation {corr[a, b]:g}"
                )
        for i in members:
            assigned[i] = len(groups)
        groups.append(tuple((i, sign[i]) for i in members))
    return tuple(groups)


def corner_codes(m: int) -> list[tuple[int, ...]]:
    """All binary corner codes of an m-cube; the first axis varies slowest."""
    return list(itertools.product((0, 1), repeat=m))


@dataclass(frozen=True)
class CornerDistribution:
    probs: np.ndarray
    method: str
    samples: int = 0
    tolerance: float = 0.0

    @property
    def m(self) -> int:
        return int(np.log2(len(self.probs)))

    def probability(self, code: Sequence[int]) -> float:
        idx = 0
        for b in code:
            idx = (idx << 1) | int(b)
        return float(self.probs[idx])

    def sample(self, rng: np.random.Generator) -> tuple[int, ...]:
        idx = int(np.searchsorted(np.cumsum(self.probs), rng.random() * self.probs.sum(), side="right"))
        idx = min(idx, len(self.probs) - 1)
        return tuple((idx >> (self.m - 1 - j)) & 1 for j in range(self.m))

    def as_dict(self) -> dict[tuple[int, ...], float]:
        return dict(zip(corner_codes(self.m), self.probs.tolist()))


def corner_distribution(
    model: DependenceModel | Copula,
    lower,
    upper,
    *,
    mode: str = "exact",
    exact_limit: int = DEFAULT_EXACT_LIMIT,
    mc_samples: int = 200_000,
    rng: np.random.Generator | None = None,
) -> CornerDistribution:
    """Probability of starting a path in each corner of the cell ``[lower, upper]``.

    The cell is split at its midpoint into ``2^m`` sub-boxes and each corner
    gets the copula mass of its adjacent sub-box, normalised by the mass of
    the whole cell. For ``p = 2`` the cell is the unit cube and this is the
    plain finite-difference probability of each grid point.

    ``mode="exact"`` uses inclusion-exclusion over copula CDF values (needs
    ``m <= exact_limit``); ``mode="mc"`` counts copula samples falling in the
    cell. Beyond ``exact_limit`` the exact mode falls back to Monte Carlo.
    """
    copula = model.copula if isinstance(model, DependenceModel) else model
    a = np.asarray(lower, dtype=float)
    b = np.asarray(upper, dtype=float)
    m = copula.dim
    if a.shape != (m,) or b.shape != (m,):
        raise ValueError(f"cell bounds must have length {m}")
    if np.any(b <= a):
        raise ValueError(f"degenerate cell: lower {a.tolist()} must be < upper {b.tolist()}")
    if np.any(a < 0) or np.any(b > 1):
        raise ValueError("cell must lie inside the unit cube")
    mid = 0.5 * (a + b)

    if isinstance(copula, IndependenceCopula):
        # product measure: each sub-box has the same share as the cell
        probs = np.full(2**m, 1.0 / 2**m)
        return CornerDistribution(probs, "exact")

    if mode == "exact" and m <= exact_limit:
        return _exact_corners(copula, a, mid, b)
    if mode not in ("exact", "mc"):
        raise ValueError(f"unknown corner mode {mode!r}")
    return _mc_corners(copula, a, mid, b, mc_samples, rng)


def _exact_corners(copula: Copula, a, mid, b) -> CornerDistribution:
    m = len(a)
    knots = np.stack([a, mid, b])  # (3, m)
    grid = np.array(list(itertools.product(range(3), repeat=m)))
    pts = knots[grid, np.arange(m)]
    table = np.asarray(copula.cdf(pts)).reshape((3,) * m)

    vertices = np.array(corner_codes(m))
    vsign = (-1.0) ** (m - vertices.sum(axis=1))
    probs = np.empty(2**m)
    for k, code in enumerate(corner_codes(m)):
        lo = np.asarray(code)
        idx = lo + vertices  # lower knot index is code, upper is code + 1
        probs[k] = np.dot(vsign, table[tuple(idx.T)])
    total = np.dot(vsign, table[tuple((2 * vertices).T)])

    tol = getattr(copula, "tol", 0.0) * 2**m
    if total <= 0:
        raise CdfAccuracyError(f"copula mass of the cell is {total:.3g}; cannot normalise")
    if probs.min() < -tol:
        raise CdfAccuracyError(
            f"corner probability {probs.min():.3g} is negative beyond the CDF tolerance"
        )
    probs = np.clip(probs, 0.0, None)
    return CornerDistribution(probs / probs.sum(), "exact", tolerance=tol / total)


def _mc_corners(copula: Copula, a, mid, b, n, rng) -> CornerDistribution:
    rng = np.random.default_rng(0) if rng is None else rng
    u = copula.sample(n, rng)
    inside = np.all((u >= a) & (u <= b), axis=1)
    u = u[inside]
    if len(u) == 0:
        raise CdfAccuracyError(f"no copula sample out of {n} fell inside the cell")
    bits = (u >= mid).astype(int)
    weights = 1 << np.arange(len(a) - 1, -1, -1)
    counts = np.bincount(bits @ weights, minlength=2 ** len(a)).astype(float)
    probs = counts / counts.sum()
    stderr = float(np.sqrt(0.25 / len(u)))
    return CornerDistribution(probs, "mc", samples=len(u), tolerance=3 * stderr)


def expand_corners(model: DependenceModel, dist: CornerDistribution) -> dict[tuple[int, ...], float]:
    """Corner probabilities over the member parameters.

    A member with sign -1 sits on the reflected axis, so its bit is the
    negation of its group's bit. Member corners not reachable from any group
    corner get probability zero.
    """
    out = {code: 0.0 for code in corner_codes(model.n_params)}
    for code, prob in dist.as_dict().items():
        member = [0] * model.n_params
        for g, members in enumerate(model.groups):
            for idx, sign in members:
                member[idx] = code[g] if sign > 0 else 1 - code[g]
        out[tuple(member)] += prob
    return out
