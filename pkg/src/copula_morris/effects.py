"""Elementary effects and the Morris sensitivity measures."""

from __future__ import annotations

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .sampler import SamplingPlan

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EffectSample:
    factor: int
    path: int
    value: float


@dataclass(frozen=True)
class Effects:
    samples: tuple[EffectSample, ...]
    n_factors: int
    excluded_paths: tuple[int, ...] = ()

    def by_factor(self) -> list[np.ndarray]:
        out: list[list[float]] = [[] for _ in range(self.n_factors)]
        for s in self.samples:
            out[s.factor].append(s.value)
        return [np.array(v) for v in out]


def elementary_effects(plan: SamplingPlan, outputs) -> Effects:
    """Difference quotients along every path of ``plan``.

    ``outputs[i][k]`` is the model output at point ``k`` of path ``i``. A
    step that moves factor ``j`` by ``-delta`` divides by ``-delta``, so the
    effect is always measured towards increasing factor level. Paths with a
    non-finite output are left out and listed in ``excluded_paths``.
    """
    outputs = np.asarray(outputs, dtype=float)
    m = plan.cfg.n_factors
    if outputs.shape != (len(plan.paths), m + 1):
        raise ValueError(
            f"expected outputs of shape {(len(plan.paths), m + 1)}, got {outputs.shape}"
        )
    delta = float(plan.cfg.delta)
    samples = []
    excluded = []
    for i, (path, y) in enumerate(zip(plan.paths, outputs)):
        if not np.all(np.isfinite(y)):
            excluded.append(i)
            continue
        for k, (axis, direction) in enumerate(path.steps()):
            samples.append(EffectSample(axis, i, (y[k + 1] - y[k]) / (direction * delta)))
    if excluded:
        log.warning("excluded %d path(s) with non-finite outputs: %s", len(excluded), excluded)
    return Effects(tuple(samples), m, tuple(excluded))


@dataclass(frozen=True)
class FactorMeasures:
    name: str
    mu: float
    mu_star: float
    sigma: float | None
    count: int
    rank: int = 0

    @property
    def composite(self) -> float | None:
        if self.sigma is None:
            return None
        return math.hypot(self.mu, self.sigma)


@dataclass(frozen=True)
class SensitivityReport:
    factors: tuple[FactorMeasures, ...]
    metadata: dict = field(default_factory=dict)

    def ranking(self) -> list[FactorMeasures]:
        return sorted(self.factors, key=lambda f: f.rank)

    def to_csv(self, composite: bool = False) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        header = ["rank", "name", "mu", "mu_star", "sigma"]
        if composite:
            header.append("mu_sigma_norm")
        writer.writerow(header)
        for f in self.ranking():
            row = [f.rank, f.name, _num(f.mu), _num(f.mu_star), _num(f.sigma)]
            if composite:
                row.append(_num(f.composite))
            writer.writerow(row)
        return buf.getvalue()

    def to_json(self) -> str:
        doc = {
            "metadata": self.metadata,
            "factors": [
                {
                    "rank": f.rank,
                    "name": f.name,
                    "mu": f.mu,
                    "mu_star": f.mu_star,
                    "sigma": f.sigma,
                    "effects": f.count,
                }
                for f in self.ranking()
            ],
        }
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    def table(self) -> str:
        width = max([4] + [len(f.name) for f in self.factors])
        lines = [f"{'rank':>4}  {'factor':<{width}}  {'mu':>12}  {'mu*':>12}  {'sigma':>12}"]
        for f in self.ranking():
            sigma = "-" if f.sigma is None else f"{f.sigma:12.6g}"
            lines.append(f"{f.rank:>4}  {f.name:<{width}}  {f.mu:12.6g}  {f.mu_star:12.6g}  {sigma:>12}")
        return "\n".join(lines)


def _num(x) -> str:
    return "" if x is None else repr(float(x))


def measures(effects: Effects, names=None, metadata=None) -> SensitivityReport:
    """mu, mu* and sigma per factor, ranked by decreasing mu*.

    sigma uses the ``r - 1`` denominator and is ``None`` for a factor with a
    single effect. Ties in mu* go to the larger sigma, then to input order.
    """
    if not effects.samples:
        raise ValueError("no elementary effects to summarise")
    names = list(names) if names is not None else [f"x{j + 1}" for j in range(effects.n_factors)]
    rows = []
    for j, d in enumerate(effects.by_factor()):
        if len(d) == 0:
            raise ValueError(f"factor {names[j]!r} has no elementary effects")
        sigma = float(np.std(d, ddof=1)) if len(d) > 1 else None
        rows.append(FactorMeasures(names[j], float(np.mean(d)), float(np.mean(np.abs(d))), sigma, len(d)))
    order = sorted(
        range(len(rows)),
        key=lambda j: (-rows[j].mu_star, -(rows[j].sigma or 0.0), j),
    )
    ranked = [None] * len(rows)
    for rank, j in enumerate(order, start=1):
        f = rows[j]
        ranked[j] = FactorMeasures(f.name, f.mu, f.mu_star, f.sigma, f.count, rank)
    return SensitivityReport(tuple(ranked), dict(metadata or {}))
