"""Copula-constrained Morris designs.

A path is drawn in three independent stages: a block from Latin hypercube
sampling with dependence (LHSD), a start corner from the copula mass around
each corner of that block, and a uniformly random traversal order. With the
independence copula every stage is uniform and the design reduces to the
classic Morris one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .copula import CornerDistribution, DependenceModel, corner_distribution
from .grid import ElementaryPath, GridConfig, build_path

PLAN_FORMAT = "copula-morris-plan"
PLAN_VERSION = 1


def rank_stats(samples) -> np.ndarray:
    """Rank of each sample within its column, counted from 1.

    Ties are broken by sample index, so an earlier duplicate ranks lower.
    """
    u = np.asarray(samples, dtype=float)
    if u.ndim == 1:
        return rank_stats(u[:, None])[:, 0]
    order = np.argsort(u, axis=0, kind="stable")
    ranks = np.empty_like(order)
    ranks[order, np.arange(u.shape[1])] = np.arange(1, u.shape[0] + 1)[:, None]
    return ranks


def lhsd_blocks(
    model: DependenceModel,
    cfg: GridConfig,
    count: int,
    rng: np.random.Generator,
) -> np.ndarray:
    """Block origins (level indices) for ``count`` paths, shape ``(count, m)``.

    Each round draws ``l = p - s`` copula samples and replaces them by their
    ranks, so every origin index appears once per axis per round. Rounds are
    repeated until there are enough origins; the surplus of the final round
    is dropped.
    """
    l = cfg.n_origins
    if l < 1:
        raise ValueError(f"no room for a block: step {cfg.step} with {cfg.levels} levels")
    if model.n_factors != cfg.n_factors:
        raise ValueError(
            f"dependence model has {model.n_factors} factors, grid has {cfg.n_factors}"
        )
    rounds = math.ceil(count / l)
    out = [rank_stats(model.sample(l, rng)) - 1 for _ in range(rounds)]
    if not out:
        return np.empty((0, cfg.n_factors), dtype=int)
    return np.vstack(out)[:count]


def block_cell(cfg: GridConfig, origin) -> tuple[np.ndarray, np.ndarray]:
    """Unit-cube bounds of the block whose lower corner sits at ``origin``."""
    lo = np.asarray(origin, dtype=float)
    return lo / (cfg.levels - 1), (lo + cfg.step) / (cfg.levels - 1)


class CornerSampler:
    """Start-corner draws with the per-block distribution memoised.

    ``mode="invariant"`` computes one distribution on the whole cube and
    reuses it for every block, which is adequate for the Gaussian copula.
    """

    def __init__(self, model: DependenceModel, cfg: GridConfig, mode: str = "exact", **kwargs):
        if mode not in ("exact", "mc", "invariant"):
            raise ValueError(f"unknown corner mode {mode!r}")
        self.model = model
        self.cfg = cfg
        self.mode = mode
        self.kwargs = kwargs
        self._cache: dict[tuple[int, ...], CornerDistribution] = {}

    def distribution(self, origin) -> CornerDistribution:
        key = () if self.mode == "invariant" else tuple(int(o) for o in origin)
        dist = self._cache.get(key)
        if dist is None:
            if self.mode == "invariant":
                m = self.cfg.n_factors
                dist = corner_distribution(self.model, np.zeros(m), np.ones(m), **self.kwargs)
            else:
                lo, hi = block_cell(self.cfg, origin)
                kwargs = dict(self.kwargs)
                if self.mode == "mc":
                    kwargs["mode"] = "mc"
                    kwargs.setdefault("rng", np.random.default_rng(list(key)))
                dist = corner_distribution(self.model, lo, hi, **kwargs)
            self._cache[key] = dist
        return dist

    def sample(self, origin, rng: np.random.Generator) -> tuple[int, ...]:
        return self.distribution(origin).sample(rng)


def sample_start_corner(
    model: DependenceModel,
    cfg: GridConfig,
    origin,
    rng: np.random.Generator,
    *,
    mode: str = "exact",
) -> tuple[int, ...]:
    return CornerSampler(model, cfg, mode).sample(origin, rng)


@dataclass(frozen=True)
class SamplingPlan:
    cfg: GridConfig
    model: DependenceModel
    r: int
    seed: int
    paths: tuple[ElementaryPath, ...]
    corner_mode: str = "exact"
    factor_names: tuple[str, ...] = field(default=())

    @property
    def n_evaluations(self) -> int:
        return sum(len(p.points) for p in self.paths)

    def points(self) -> np.ndarray:
        """Level vectors of every evaluation point, shape ``(r, m + 1, m)``."""
        return np.array([p.points for p in self.paths], dtype=int)

    def distinct_points(self) -> list[tuple[int, ...]]:
        seen = dict.fromkeys(pt for p in self.paths for pt in p.points)
        return list(seen)

    def to_dict(self) -> dict:
        return {
            "format": PLAN_FORMAT,
            "version": PLAN_VERSION,
            "seed": self.seed,
            "levels": self.cfg.levels,
            "step": self.cfg.step,
            "paths_requested": self.r,
            "corner_mode": self.corner_mode,
            "factors": list(self.factor_names),
            "dependence": self.model.to_dict(),
            "paths": [p.to_dict() for p in self.paths],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SamplingPlan":
        if d.get("format") != PLAN_FORMAT:
            raise ValueError(f"not a sampling plan (format={d.get('format')!r})")
        model = DependenceModel.from_dict(d["dependence"])
        cfg = GridConfig(model.n_factors, d["levels"], d["step"])
        paths = []
        for p in d["paths"]:
            path = build_path(cfg, p["origin"], p["start"], p["permutation"])
            if [list(x) for x in path.points] != p["points"]:
                raise ValueError("plan points disagree with their origin/start/permutation")
            paths.append(path)
        return cls(cfg, model, d["paths_requested"], d["seed"], tuple(paths),
                   d.get("corner_mode", "exact"), tuple(d.get("factors", ())))


def build_plan(
    model: DependenceModel,
    cfg: GridConfig,
    r: int,
    seed: int,
    *,
    corner_mode: str = "exact",
    factor_names=(),
) -> SamplingPlan:
    """Sample ``r`` elementary paths; a pure function of its arguments."""
    if r < 1:
        raise ValueError(f"number of paths must be >= 1, got {r}")
    rng = np.random.default_rng(seed)
    origins = lhsd_blocks(model, cfg, r, rng)
    corners = CornerSampler(model, cfg, corner_mode)
    paths = []
    for origin in origins:
        start = corners.sample(origin, rng)
        perm = rng.permutation(cfg.n_factors) + 1
        paths.append(build_path(cfg, origin, start, perm))
    names = tuple(factor_names) or tuple(f"x{j + 1}" for j in range(cfg.n_factors))
    return SamplingPlan(cfg, model, r, seed, tuple(paths), corner_mode, names)
