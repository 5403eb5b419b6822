import math
from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from torusrestrict.cap_stats import (Cap, cell_histogram, chord_to_arc, circle_arc_sweep,
                                     cluster_partition, coplanar_cap_sweep, coplanarity_check,
                                     iter_shells, max_cap_count, mean_square_statistic,
                                     min_enclosing_arc_of_three)
from torusrestrict.lattice_shell import ShellSpec, enumerate_shell


def shell(d, m):
    return enumerate_shell(ShellSpec(d, m))


def brute_arc_max(sh, arc_len):
    """Best closed arc: some optimal arc starts at a shell point."""
    lam = sh.radius
    ang = [math.atan2(y, x) % (2 * math.pi) for x, y in sh.points.tolist()]
    return max(sum(1 for b in ang if (b - a) % (2 * math.pi) <= arc_len / lam + 1e-14) for a in ang)


def brute_centered(sh, r):
    pts = sh.points
    return max(int(np.sum(np.sum((pts - p) ** 2, axis=1) <= r * r)) for p in pts)


@pytest.mark.parametrize("r, expected", [(2 * math.pi * 5, 12), (1.0, 1), (1.5, 2)])
def test_exact2d_examples(r, expected):
    assert max_cap_count(shell(2, 25), r, "exact2d") == expected


@pytest.mark.parametrize("m", [25, 65, 325, 1105, 5525, 4225, 50])
@pytest.mark.parametrize("r", [0.5, 1.5, 3.0, 7.5, 20.0])
def test_cap_counts_against_brute_force(m, r):
    sh = shell(2, m)
    assert max_cap_count(sh, r, "exact2d") == brute_arc_max(sh, r)
    assert max_cap_count(sh, r, "centered") == brute_centered(sh, r)


@pytest.mark.parametrize("d, m", [(2, 5525), (2, 1105), (3, 594), (3, 1001), (4, 50)])
def test_cap_monotone_in_r(d, m):
    sh = shell(d, m)
    modes = ("exact2d", "centered") if d == 2 else ("centered",)
    for mode in modes:
        counts = [max_cap_count(sh, r, mode) for r in np.linspace(0.5, 2 * sh.radius, 40)]
        assert counts == sorted(counts)


@pytest.mark.parametrize("m", [25, 65, 1105, 5525, 32045, 1000009])
@pytest.mark.parametrize("r", [1.5, 3.2, 10.0, 40.0])
def test_sandwich(m, r):
    # F(r) over chordal caps of radius r on a circle equals the best arc of
    # length 2*arc(r); it is squeezed between centred caps at r and 2r.
    sh = shell(2, m)
    f_chordal = max_cap_count(sh, 2 * chord_to_arc(r, sh.radius), "exact2d")
    assert max_cap_count(sh, r, "centered") <= f_chordal <= max_cap_count(sh, 2 * r, "centered")
    # an arc of length r sits inside the chordal cap about its first point
    assert max_cap_count(sh, r, "exact2d") <= max_cap_count(sh, r, "centered")


def test_arc_and_chord_windows_differ():
    # (5,0) with (4,+-3) fits in a chordal 3.2-cap, but no 3.2-long arc holds 3 points
    sh = shell(2, 25)
    assert max_cap_count(sh, 3.2, "centered") == 3
    assert max_cap_count(sh, 3.2, "exact2d") == 2


def test_exact2d_needs_plane():
    with pytest.raises(ValueError):
        max_cap_count(shell(3, 2), 1.0, "exact2d")
    with pytest.raises(ValueError):
        max_cap_count(shell(2, 25), 1.0, "bogus")


def test_min_arc_of_three_m25():
    assert min_enclosing_arc_of_three(shell(2, 25)) == pytest.approx(4.6365, abs=1e-4)
    assert min_enclosing_arc_of_three(shell(2, 25)) == pytest.approx(5 * math.atan2(4, 3), rel=1e-14)


@pytest.mark.parametrize("m", [2, 4, 9, 49, 2 * 49])
def test_min_arc_four_point_shells(m):
    sh = shell(2, m)
    assert len(sh) == 4
    # three of four equally spaced points span half the circle
    assert min_enclosing_arc_of_three(sh) == pytest.approx(math.pi * math.sqrt(m), rel=1e-14)


def test_min_arc_needs_three_points():
    with pytest.raises(ValueError):
        min_enclosing_arc_of_three(shell(2, 0))


@given(st.integers(min_value=1, max_value=200_000))
@settings(max_examples=300, deadline=None)
def test_min_arc_equals_threshold_of_cap_count(m):
    sh = shell(2, m)
    if len(sh) < 3:
        return
    arc = min_enclosing_arc_of_three(sh)
    assert max_cap_count(sh, arc * (1 + 1e-9), "exact2d") >= 3
    assert max_cap_count(sh, arc * (1 - 1e-9), "exact2d") <= 2


def test_bulk_arc_sweep_matches_per_shell():
    m, count, arc = circle_arc_sweep(20_000)
    for mm, c, a in zip(m, count, arc):
        sh = shell(2, int(mm))
        assert len(sh) == c
        assert a == pytest.approx(min_enclosing_arc_of_three(sh), rel=1e-12)
    expected = [mm for mm in range(1, 20_001) if len(shell(2, mm)) >= 3]
    assert m.tolist() == expected


def test_iter_shells_matches_enumeration():
    for d, top in ((2, 300), (3, 300), (4, 40)):
        seen = list(iter_shells(d, top))
        assert [s.m for s in seen] == [m for m in range(1, top + 1) if len(shell(d, m))]
        for s in seen:
            assert np.array_equal(s.points, shell(d, s.m).points)


# --------------------------------------------------------------------------
# cluster partitions

def test_cluster_all_singletons_below_one():
    part = cluster_partition(shell(3, 50), 0.99)
    assert all(len(g) == 1 for g in part.index_groups)


def test_cluster_single_group_at_diameter():
    sh = shell(2, 65)
    part = cluster_partition(sh, 2 * sh.radius)
    assert len(part.index_groups) == 1


def test_cluster_m25_threshold_2():
    part = cluster_partition(shell(2, 25), 2.0)
    assert len(part.index_groups) == 8
    pairs = sorted(tuple(map(tuple, g.tolist())) for g in part.groups if len(g) == 2)
    assert ((3, 4), (4, 3)) in pairs
    assert sorted(part.sizes()) == [1, 1, 1, 1, 2, 2, 2, 2]


def test_cluster_boundary_is_inclusive():
    # (3,4) and (4,3) are exactly sqrt(2) apart
    assert len(cluster_partition(shell(2, 25), math.sqrt(2)).index_groups) == 8


@pytest.mark.parametrize("d, m, thr", [(2, 5525, 6.0), (2, 1105, 3.0), (3, 338, 4.5), (3, 121, 2.0)])
def test_cluster_invariants(d, m, thr):
    sh = shell(d, m)
    part = cluster_partition(sh, thr)
    labels = part.labels
    idx = np.concatenate(part.index_groups)
    assert sorted(idx.tolist()) == list(range(len(sh)))
    D = np.sqrt(((sh.points[:, None, :] - sh.points[None, :, :]) ** 2).sum(-1))
    between = labels[:, None] != labels[None, :]
    assert np.all(D[between] > thr)
    # each group is connected in the threshold graph
    for g in part.index_groups:
        reached, frontier = {g[0]}, [g[0]]
        while frontier:
            i = frontier.pop()
            for j in g:
                if j not in reached and D[i, j] <= thr:
                    reached.add(j)
                    frontier.append(j)
        assert reached == set(g.tolist())
    firsts = [g[0] for g in part.index_groups]
    assert firsts == sorted(firsts)


def test_short_arcs_hold_at_most_two_points():
    for m in (5525, 32045, 71825, 1000025):
        sh = shell(2, m)
        assert max_cap_count(sh, m ** (1 / 6), "exact2d") <= 2


# --------------------------------------------------------------------------
# coplanarity

@pytest.mark.parametrize("pts", [[(1, 2, 3)], [(0, 0, 0), (5, 1, 2)], [(1, 0, 0), (0, 1, 0), (7, 7, 7)]])
def test_three_points_coplanar(pts):
    assert coplanarity_check(pts)


def test_tetrahedron_not_coplanar():
    assert not coplanarity_check([(1, 0, 0), (0, 1, 0), (0, 0, 1), (1, 1, 1)])
    assert not coplanarity_check(shell(3, 1).points)


def test_coplanar_cases():
    assert coplanarity_check([(1, 0, 0), (0, 1, 0), (-1, 0, 0), (0, -1, 0), (3, 4, 0)])
    assert coplanarity_check([(0, 0, 0), (1, 1, 1), (2, 2, 2), (5, 5, 5)])


def test_coplanarity_dimension_guard():
    with pytest.raises(ValueError):
        coplanarity_check([(1, 0), (0, 1)])
    with pytest.raises(ValueError):
        coplanarity_check([])


@given(st.lists(st.tuples(*[st.integers(-20, 20)] * 3), min_size=1, max_size=8))
@settings(max_examples=300, deadline=None)
def test_coplanarity_matches_rank(pts):
    arr = np.array(pts, dtype=float)
    rank = np.linalg.matrix_rank(arr[1:] - arr[0]) if len(arr) > 1 else 0
    assert coplanarity_check(pts) == (rank <= 2)


def test_small_caps_coplanar_low_range():
    bad, largest, checked = coplanar_cap_sweep(1500)
    assert bad == [] and checked > 1000 and largest >= 1


# --------------------------------------------------------------------------
# cells

def direct_binning(sh, side):
    return Counter(tuple(math.floor(c / side) for c in p) for p in sh.points.tolist())


@pytest.mark.parametrize("d, m, side", [(3, 100, math.sqrt(10)), (3, 1009, 1009 ** 0.25),
                                        (2, 5525, 7.3), (4, 30, 1.7)])
def test_histogram_matches_direct_binning(d, m, side):
    sh = shell(d, m)
    hist = cell_histogram(sh, side)
    assert hist.counts == dict(direct_binning(sh, side))
    assert hist.total == len(sh)


def test_histogram_frozen_values():
    # frozen from direct binning of a brute-force enumeration
    h100 = cell_histogram(shell(3, 100), math.sqrt(10))
    assert (h100.total, mean_square_statistic(h100), len(h100.counts)) == (30, 30, 30)
    h1009 = cell_histogram(shell(3, 1009), 1009 ** 0.25)
    assert (h1009.total, mean_square_statistic(h1009), len(h1009.counts)) == (240, 288, 224)


def test_large_cells_one_per_orthant():
    sh = shell(3, 1001)
    hist = cell_histogram(sh, 3 * sh.radius)
    assert set(hist.counts) <= set(np.ndindex(2, 2, 2)) | {
        tuple(v) for v in np.array(list(np.ndindex(2, 2, 2))) - 1}
    assert hist.total == len(sh)


def test_mean_square_extremes():
    sh = shell(3, 1001)
    tiny = cell_histogram(sh, 0.5)
    assert mean_square_statistic(tiny) == len(sh)
    one = cell_histogram(sh, 10 * sh.radius)
    one_cell = {k: v for k, v in one.counts.items()}
    merged = sum(one_cell.values())
    assert merged == len(sh)
    from torusrestrict.cap_stats import CellHistogram
    assert mean_square_statistic(CellHistogram(1.0, {(0, 0, 0): len(sh)})) == len(sh) ** 2


def test_default_cell_side():
    assert cell_histogram(shell(3, 1009)).cell_side == pytest.approx(1009 ** 0.25)


# --------------------------------------------------------------------------
# caps

def test_cap_validation():
    with pytest.raises(ValueError):
        Cap((1.0, 1.0, 0.0), 1.0)
    with pytest.raises(ValueError):
        Cap((1.0, 0.0, 0.0), 0.0)
    c = Cap.toward((3, 4, 0), 2.0)
    assert np.linalg.norm(c.center) == pytest.approx(1.0, abs=1e-15)


def test_cap_members():
    sh = shell(3, 1)
    cap = Cap((1.0, 0.0, 0.0), 1.5)
    got = sorted(map(tuple, sh.points[cap.members(sh)].tolist()))
    assert got == [(0, -1, 0), (0, 0, -1), (0, 0, 1), (0, 1, 0), (1, 0, 0)]
