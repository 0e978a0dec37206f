import itertools
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from copula_morris.grid import (
    GridConfig,
    build_path,
    corner_sequence,
    count_paths,
    enumerate_paths,
    morris_step,
)


def brute_force_paths(n, p, s):
    """Distinct undirected walks of n steps, each changing a different axis by +-s.

    Walks the whole level grid directly, with no notion of blocks, corners
    or permutations.
    """
    found = set()

    def extend(walk, used):
        if len(used) == n:
            key = tuple(walk)
            found.add(min(key, key[::-1]))
            return
        here = walk[-1]
        for axis in range(n):
            if axis in used:
                continue
            for sign in (-s, s):
                nxt = list(here)
                nxt[axis] += sign
                if 0 <= nxt[axis] <= p - 1:
                    extend(walk + [tuple(nxt)], used | {axis})

    for start in itertools.product(range(p), repeat=n):
        extend([start], frozenset())
    return found


SMALL_GRIDS = [(n, p, s) for n in (1, 2, 3) for p in (2, 3, 4) for s in range(1, p)]


def test_config_validation():
    with pytest.raises(ValueError):
        GridConfig(0, 4, 1)
    with pytest.raises(ValueError):
        GridConfig(2, 1, 1)
    with pytest.raises(ValueError):
        GridConfig(2, 4, 4)
    with pytest.raises(ValueError):
        GridConfig(2, 4, 0)


@pytest.mark.parametrize("p, s, expected", [(4, 2, Fraction(2, 3)), (2, 1, Fraction(1)), (4, 1, Fraction(1, 3))])
def test_morris_step(p, s, expected):
    assert morris_step(GridConfig(1, p, s)) == expected


@pytest.mark.parametrize("n, p, s, expected", [(2, 4, 1, 36), (3, 3, 1, 192), (1, 2, 1, 1)])
def test_count_paths_examples(n, p, s, expected):
    assert len(brute_force_paths(n, p, s)) == expected
    assert count_paths(GridConfig(n, p, s)) == expected


@pytest.mark.parametrize("n, p, s", SMALL_GRIDS)
def test_count_paths_matches_enumeration(n, p, s):
    cfg = GridConfig(n, p, s)
    brute = brute_force_paths(n, p, s)
    assert count_paths(cfg) == len(brute)
    listed = {min(pt.points, pt.points[::-1]) for pt in enumerate_paths(cfg)}
    assert listed == brute


def test_count_paths_large_is_exact():
    # far beyond 64-bit range
    cfg = GridConfig(40, 10, 3)
    assert count_paths(cfg) == 7**40 * 2**40 * __import__("math").factorial(40) // 2


def test_permutation_examples():
    assert corner_sequence((1, 0, 0), (3, 1, 2)) == [(1, 0, 0), (1, 0, 1), (0, 0, 1), (0, 1, 1)]


def test_canonical_and_full_negation_walks():
    assert corner_sequence((0, 0), (1, 2)) == [(0, 0), (1, 0), (1, 1)]
    assert corner_sequence((1, 1), (2, 1)) == [(1, 1), (1, 0), (0, 0)]


def test_build_path_scales_by_step():
    cfg = GridConfig(3, 4, 2)
    path = build_path(cfg, (1, 0, 1), (1, 0, 0), (3, 1, 2))
    assert path.points == ((3, 0, 1), (3, 0, 3), (1, 0, 3), (1, 2, 3))


def test_build_path_rejects_mismatch():
    cfg = GridConfig(3, 4, 1)
    with pytest.raises(ValueError):
        build_path(cfg, (0, 0), (0, 0, 0), (1, 2, 3))
    with pytest.raises(ValueError):
        build_path(cfg, (0, 0, 0), (0, 0, 0), (1, 1, 2))
    with pytest.raises(ValueError):
        build_path(cfg, (3, 0, 0), (0, 0, 0), (1, 2, 3))


@st.composite
def paths(draw):
    n = draw(st.integers(1, 5))
    p = draw(st.integers(2, 6))
    s = draw(st.integers(1, p - 1))
    cfg = GridConfig(n, p, s)
    origin = draw(st.lists(st.integers(0, p - 1 - s), min_size=n, max_size=n))
    start = draw(st.lists(st.integers(0, 1), min_size=n, max_size=n))
    perm = draw(st.permutations(list(range(1, n + 1))))
    return cfg, build_path(cfg, origin, start, perm)


@given(paths())
@settings(max_examples=200)
def test_path_invariants(case):
    cfg, path = case
    n = cfg.n_factors
    assert len(path.points) == n + 1
    for pt in path.points:
        assert all(0 <= v <= cfg.levels - 1 for v in pt)
    axes = []
    for a, b in zip(path.points[:-1], path.points[1:]):
        diff = [y - x for x, y in zip(a, b)]
        moved = [j for j, d in enumerate(diff) if d]
        assert len(moved) == 1
        assert abs(diff[moved[0]]) == cfg.step
        axes.append(moved[0])
    assert sorted(axes) == list(range(n))
    end = tuple(1 - b for b in path.start)
    assert path.points[-1] == tuple(o + b * cfg.step for o, b in zip(path.origin, end))


@given(paths())
def test_reversed_path_visits_same_points(case):
    cfg, path = case
    rev = path.reversed()
    assert rev.points == path.points[::-1]
    assert build_path(cfg, rev.origin, rev.start, rev.permutation).points == rev.points
