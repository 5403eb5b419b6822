import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusrestrict.lattice_shell import (ShellCapacityError, ShellSpec, enumerate_shell,
                                         is_symmetric, min_pairwise_distance, shell_count,
                                         two_squares_count_oracle)


def brute_force(d, m):
    s = math.isqrt(m)
    return sorted(p for p in itertools.product(range(-s, s + 1), repeat=d)
                  if sum(c * c for c in p) == m)


@pytest.mark.parametrize("d, m, expected", [
    (2, 25, [(-5, 0), (-4, -3), (-4, 3), (-3, -4), (-3, 4), (0, -5), (0, 5),
             (3, -4), (3, 4), (4, -3), (4, 3), (5, 0)]),
    (2, 0, [(0, 0)]),
    (4, 1, sorted([tuple(s * e for e in row) for row in np.eye(4, dtype=int).tolist()
                   for s in (1, -1)])),
])
def test_enumerate_examples(d, m, expected):
    assert enumerate_shell(ShellSpec(d, m)).as_tuples() == expected


def test_d3_m2_is_signed_permutations_of_110():
    pts = enumerate_shell(ShellSpec(3, 2)).as_tuples()
    expected = sorted({tuple(s[i] * v for i, v in enumerate(perm))
                       for perm in itertools.permutations((1, 1, 0))
                       for s in itertools.product((1, -1), repeat=3)})
    assert pts == expected and len(pts) == 12


@pytest.mark.parametrize("d, m", [(2, m) for m in range(0, 60)]
                         + [(3, m) for m in range(0, 40)]
                         + [(4, m) for m in (0, 1, 7, 12, 30)]
                         + [(5, m) for m in (0, 3, 11)])
def test_matches_brute_force(d, m):
    shell = enumerate_shell(ShellSpec(d, m))
    assert shell.as_tuples() == brute_force(d, m)
    assert shell_count(ShellSpec(d, m)) == len(shell)


@pytest.mark.parametrize("m, expected", [(3, 0), (25, 12), (0, 1), (1, 4), (5, 8), (65, 16),
                                         (9, 4), (45, 8), (21, 0), (1105, 32)])
def test_two_squares_oracle(m, expected):
    assert two_squares_count_oracle(m) == expected


@pytest.mark.parametrize("d, m, expected", [(2, 3, 0), (2, 25, 12), (3, 1, 6)])
def test_shell_count_examples(d, m, expected):
    assert shell_count(ShellSpec(d, m)) == expected


@given(st.integers(min_value=0, max_value=10**12))
@settings(max_examples=200, deadline=None)
def test_count_matches_oracle_large(m):
    assert shell_count(ShellSpec(2, m)) == two_squares_count_oracle(m)


@pytest.mark.parametrize("m", [5**20 * 2, 10**14 + 1])
def test_large_m_chunked_path(m):
    assert shell_count(ShellSpec(2, m)) == two_squares_count_oracle(m)
    pts = enumerate_shell(ShellSpec(2, m)).points
    assert all(int(x) ** 2 + int(y) ** 2 == m for x, y in pts.tolist())


@pytest.mark.parametrize("d, m", [(2, 1105), (3, 50), (3, 101), (4, 14)])
def test_symmetry_closure(d, m):
    assert is_symmetric(enumerate_shell(ShellSpec(d, m)))


def test_points_satisfy_norm_and_are_distinct():
    shell = enumerate_shell(ShellSpec(3, 1001))
    assert np.all(np.sum(shell.points ** 2, axis=1) == 1001)
    assert len({tuple(p) for p in shell.points.tolist()}) == len(shell)


def test_determinism():
    a = enumerate_shell(ShellSpec(3, 525)).points
    b = enumerate_shell(ShellSpec(3, 525)).points
    assert np.array_equal(a, b)


def test_lexicographic_order():
    pts = enumerate_shell(ShellSpec(4, 30)).as_tuples()
    assert pts == sorted(pts)


@pytest.mark.parametrize("d, m, expected", [(2, 25, math.sqrt(2)), (3, 1, math.sqrt(2)),
                                            (2, 1, math.sqrt(2)), (2, 4, 2 * math.sqrt(2))])
def test_min_pairwise_distance(d, m, expected):
    assert min_pairwise_distance(enumerate_shell(ShellSpec(d, m))) == pytest.approx(expected)


def test_min_pairwise_distance_needs_two_points():
    with pytest.raises(ValueError):
        min_pairwise_distance(enumerate_shell(ShellSpec(2, 0)))


def test_min_pairwise_distance_at_least_one():
    for m in range(1, 300):
        shell = enumerate_shell(ShellSpec(3, m))
        if len(shell) >= 2:
            assert min_pairwise_distance(shell) >= 1.0


@pytest.mark.parametrize("d, m", [(1, 5), (6, 5), (2, -1), (2, 2.5)])
def test_invalid_spec(d, m):
    with pytest.raises(ValueError):
        ShellSpec(d, m)


def test_capacity_error():
    with pytest.raises(ShellCapacityError):
        enumerate_shell(ShellSpec(5, 10**6), max_points=10**6)


def test_growth_constant_is_reported():
    # #E <= K m^{(d-2)/2 + 0.1}: measure K over a range, it must stay modest
    for d in (3, 4):
        ratios = [shell_count(ShellSpec(d, m)) / m ** ((d - 2) / 2 + 0.1) for m in range(1, 400)]
        assert 0 < max(ratios) < 100
