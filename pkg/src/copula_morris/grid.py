"""Discrete geometry of the p-level unit hypercube.

Levels are integers in ``[0, p-1]``; unit-cube coordinates are derived on
demand as ``level / (p - 1)``. An elementary path lives on the contour of an
``s``-sized block: it starts in one corner, flips one axis per step and ends
in the opposite corner.

Permutations are axis-index vectors counted from 1, so ``(3, 1, 2)`` means
"change the third axis first, then the first, then the second".
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

import numpy as np


@dataclass(frozen=True)
class GridConfig:
    """Grid of ``levels`` points per axis over ``n_factors`` effective factors."""

    n_factors: int
    levels: int
    step: int

    def __post_init__(self):
        if self.n_factors < 1:
            raise ValueError(f"n_factors must be >= 1, got {self.n_factors}")
        if self.levels < 2:
            raise ValueError(f"levels must be >= 2, got {self.levels}")
        if not 1 <= self.step <= self.levels - 1:
            raise ValueError(
                f"step must lie in [1, {self.levels - 1}] for {self.levels} levels, got {self.step}"
            )

    @property
    def delta(self) -> Fraction:
        return morris_step(self)

    @property
    def n_origins(self) -> int:
        """Distinct block origins per axis."""
        return self.levels - self.step

    def unit(self, levels) -> np.ndarray:
        return np.asarray(levels, dtype=float) / (self.levels - 1)


def morris_step(cfg: GridConfig) -> Fraction:
    return Fraction(cfg.step, cfg.levels - 1)


def count_paths(cfg: GridConfig) -> int:
    """Number of distinct undirected elementary paths on the grid.

    Blocks times start corners times traversal orders, halved because a path
    walked backwards yields the same elementary effects. Exact integer
    arithmetic, so large grids never wrap.
    """
    n = cfg.n_factors
    total = cfg.n_origins**n * 2**n * math.factorial(n)
    return total // 2


def _check_permutation(perm: Sequence[int], n: int) -> tuple[int, ...]:
    perm = tuple(int(k) for k in perm)
    if sorted(perm) != list(range(1, n + 1)):
        raise ValueError(f"permutation {perm} is not a permutation of 1..{n}")
    return perm


def corner_sequence(start: Sequence[int], perm: Sequence[int]) -> list[tuple[int, ...]]:
    """Corner codes visited when flipping the bits of ``start`` in ``perm`` order."""
    code = [int(b) for b in start]
    if any(b not in (0, 1) for b in code):
        raise ValueError(f"corner code must be binary, got {tuple(start)}")
    perm = _check_permutation(perm, len(code))
    seq = [tuple(code)]
    for axis in perm:
        code[axis - 1] ^= 1
        seq.append(tuple(code))
    return seq


@dataclass(frozen=True)
class ElementaryPath:
    points: tuple[tuple[int, ...], ...]
    origin: tuple[int, ...]
    start: tuple[int, ...]
    permutation: tuple[int, ...]

    @property
    def n_factors(self) -> int:
        return len(self.origin)

    def steps(self) -> Iterator[tuple[int, int]]:
        """Yield ``(axis, direction)`` per step; axis is 0-based, direction is +1 or -1."""
        for before, after in zip(self.points[:-1], self.points[1:]):
            diff = [a - b for a, b in zip(after, before)]
            axis = next(j for j, d in enumerate(diff) if d)
            yield axis, (1 if diff[axis] > 0 else -1)

    def reversed(self) -> "ElementaryPath":
        end = tuple(1 - b for b in self.start)
        return ElementaryPath(
            points=tuple(reversed(self.points)),
            origin=self.origin,
            start=end,
            permutation=tuple(reversed(self.permutation)),
        )

    def to_dict(self) -> dict:
        return {
            "origin": list(self.origin),
            "start": list(self.start),
            "permutation": list(self.permutation),
            "points": [list(p) for p in self.points],
        }


def build_path(
    cfg: GridConfig,
    origin: Sequence[int],
    start: Sequence[int],
    perm: Sequence[int],
) -> ElementaryPath:
    n = cfg.n_factors
    if not (len(origin) == len(start) == len(perm) == n):
        raise ValueError(
            f"dimension mismatch: grid has {n} factors, got origin={len(origin)}, "
            f"start={len(start)}, permutation={len(perm)}"
        )
    origin = tuple(int(o) for o in origin)
    if any(not 0 <= o <= cfg.n_origins - 1 for o in origin):
        raise ValueError(f"block origin {origin} outside [0, {cfg.n_origins - 1}]")
    codes = corner_sequence(start, perm)
    points = tuple(
        tuple(o + b * cfg.step for o, b in zip(origin, code)) for code in codes
    )
    return ElementaryPath(points, origin, codes[0], tuple(int(k) for k in perm))


def enumerate_paths(cfg: GridConfig) -> Iterator[ElementaryPath]:
    """Every distinct undirected path, each listed once.

    A path and its reverse share a block; the reverse starts at the negated
    corner, so keeping starts whose first bit is 0 picks one of each pair.
    """
    n = cfg.n_factors
    perms = [tuple(p) for p in itertools.permutations(range(1, n + 1))]
    for origin in itertools.product(range(cfg.n_origins), repeat=n):
        for start in itertools.product((0, 1), repeat=n):
            if start[0] == 1:
                continue
            for perm in perms:
                yield build_path(cfg, origin, start, perm)
