"""Cap and arc statistics of lattice points on spheres.

Caps are chordal: the cap of size r about a direction u on the sphere of
radius lam is {x on the sphere : |x - lam u| <= r}. On circles, ``exact2d``
works with arcs of a given arc length instead.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .lattice_shell import Shell, ShellSpec

TWO_PI = 2 * math.pi


@dataclass(frozen=True)
class Cap:
    center: tuple
    size_r: float

    def __post_init__(self):
        c = np.asarray(self.center, dtype=np.float64)
        if abs(np.linalg.norm(c) - 1.0) > 1e-12:
            raise ValueError("cap center must be a unit vector")
        if not self.size_r > 0:
            raise ValueError("cap size must be positive")
        object.__setattr__(self, "center", tuple(float(v) for v in c))

    @classmethod
    def toward(cls, direction, size_r: float) -> "Cap":
        v = np.asarray(direction, dtype=np.float64)
        return cls(tuple(v / np.linalg.norm(v)), size_r)

    def members(self, shell: Shell) -> np.ndarray:
        """Indices of shell points inside the cap."""
        if len(self.center) != shell.d:
            raise ValueError("cap and shell dimensions differ")
        apex = shell.radius * np.asarray(self.center)
        dist = np.linalg.norm(shell.points - apex, axis=1)
        return np.flatnonzero(dist <= self.size_r)


def _sorted_angles(shell: Shell) -> np.ndarray:
    pts = shell.points
    return np.sort(np.mod(np.arctan2(pts[:, 1], pts[:, 0]), TWO_PI))


def chord_to_arc(r: float, lam: float) -> float:
    """Arc length subtended by a chord of length r on a circle of radius lam."""
    return 2 * lam * math.asin(min(1.0, r / (2 * lam)))


def max_cap_count(shell: Shell, r: float, mode: str = "centered") -> int:
    """Largest number of shell points in one cap (or arc) of size r.

    ``exact2d`` slides a closed arc of arc length r over the angularly sorted
    circle points and is exact over all arc positions. ``centered`` takes the
    best chordal cap centred at a shell point; for the continuum maximum
    F(r) over chordal caps it satisfies centered(r) <= F(r) <= centered(2r).
    """
    if len(shell) == 0:
        raise ValueError("shell is empty")
    if r <= 0:
        raise ValueError("cap size must be positive")
    if mode == "exact2d":
        if shell.d != 2:
            raise ValueError("exact2d mode needs a planar shell (d = 2)")
        n = len(shell)
        if shell.m == 0 or r >= TWO_PI * shell.radius:
            return n
        ang = _sorted_angles(shell)
        doubled = np.concatenate([ang, ang + TWO_PI])
        reach = np.searchsorted(doubled, ang + r / shell.radius, side="right")
        return int(min(n, np.max(reach - np.arange(n))))
    if mode == "centered":
        pts = shell.points.astype(np.float64)
        counts = cKDTree(pts).query_ball_point(pts, r, return_length=True)
        return int(np.max(counts))
    raise ValueError(f"unknown mode {mode!r}; expected 'exact2d' or 'centered'")


def min_enclosing_arc_of_three(shell: Shell) -> float:
    """Shortest arc (in arc length) containing three points of a circle shell."""
    if shell.d != 2:
        raise ValueError("arc statistics need a planar shell (d = 2)")
    n = len(shell)
    if n < 3:
        raise ValueError(f"need at least three points, shell has {n}")
    ang = _sorted_angles(shell)
    ahead = np.concatenate([ang[2:], ang[:2] + TWO_PI])
    return float(np.min(ahead - ang) * shell.radius)


@dataclass
class ClusterPartition:
    """Groups of point indices into a shell, plus the linking threshold."""

    shell: Shell = field(repr=False)
    index_groups: list
    threshold: float

    @property
    def groups(self) -> list[np.ndarray]:
        return [self.shell.points[g] for g in self.index_groups]

    @property
    def labels(self) -> np.ndarray:
        out = np.empty(len(self.shell), dtype=np.int64)
        for k, g in enumerate(self.index_groups):
            out[g] = k
        return out

    def sizes(self) -> list[int]:
        return [len(g) for g in self.index_groups]


def _integer_pairs_within(points: np.ndarray, threshold: float) -> np.ndarray:
    tree = cKDTree(points.astype(np.float64))
    pairs = tree.query_pairs(threshold * (1 + 1e-9), output_type="ndarray")
    if len(pairs) == 0:
        return pairs
    # decide boundary cases with exact integer arithmetic
    diff = points[pairs[:, 0]] - points[pairs[:, 1]]
    d2 = np.einsum("ij,ij->i", diff, diff)
    return pairs[d2 <= threshold * threshold]


def cluster_partition(shell: Shell, threshold: float) -> ClusterPartition:
    """Connected components of the graph joining points at distance <= threshold."""
    if len(shell) == 0:
        raise ValueError("shell is empty")
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    n = len(shell)
    pairs = _integer_pairs_within(shell.points, threshold)
    graph = coo_matrix(
        (np.ones(len(pairs)), (pairs[:, 0] if len(pairs) else [], pairs[:, 1] if len(pairs) else [])),
        shape=(n, n),
    )
    _, labels = connected_components(graph, directed=False)
    groups: dict[int, list[int]] = {}
    for idx, lab in enumerate(labels):
        groups.setdefault(int(lab), []).append(idx)
    # points are lexicographic, so the first index is the smallest member
    ordered = sorted(groups.values(), key=lambda g: g[0])
    return ClusterPartition(shell, [np.array(g, dtype=np.int64) for g in ordered], float(threshold))


def coplanarity_check(points) -> bool:
    """True iff the affine span of integer points in R^3 has dimension <= 2."""
    pts = [tuple(int(c) for c in p) for p in np.asarray(points)]
    if not pts:
        raise ValueError("need at least one point")
    if any(len(p) != 3 for p in pts):
        raise ValueError("coplanarity is tested for points in three dimensions")
    p0 = pts[0]
    diffs = [(p[0] - p0[0], p[1] - p0[1], p[2] - p0[2]) for p in pts[1:]]
    normal = None
    for i, u in enumerate(diffs):
        for v in diffs[i + 1:]:
            c = (u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0])
            if c != (0, 0, 0):
                normal = c
                break
        if normal is not None:
            break
    if normal is None:
        return True
    return all(w[0] * normal[0] + w[1] * normal[1] + w[2] * normal[2] == 0 for w in diffs)


@dataclass
class CellHistogram:
    cell_side: float
    counts: dict

    @property
    def total(self) -> int:
        return sum(self.counts.values())


def cell_histogram(shell: Shell, cell_side: float | None = None) -> CellHistogram:
    """Tally shell points per half-open cube floor(x / cell_side).

    The default side is lam^{1/2} = m^{1/4}.
    """
    if cell_side is None:
        cell_side = shell.m ** 0.25
    if not cell_side > 0:
        raise ValueError("cell side must be positive")
    if len(shell) == 0:
        return CellHistogram(float(cell_side), {})
    cells = np.floor(shell.points / cell_side).astype(np.int64)
    keys, counts = np.unique(cells, axis=0, return_counts=True)
    return CellHistogram(float(cell_side), {tuple(int(v) for v in k): int(c) for k, c in zip(keys, counts)})


def mean_square_statistic(hist: CellHistogram) -> int:
    """Sum over cells of the squared cell counts."""
    return sum(c * c for c in hist.counts.values())


# --------------------------------------------------------------------------
# bulk kernels for sweeps over every m up to a bound

def circle_arc_sweep(m_max: int):
    """Three-point arc minima for every planar shell with m <= m_max.

    Enumerates all of Z^2 inside the disc once and groups by norm. Returns
    ``(m, count, min_arc3)`` arrays restricted to shells with >= 3 points
    (all of them: every non-empty planar shell with m > 0 has >= 4 points).
    """
    s = math.isqrt(m_max)
    x = np.arange(-s, s + 1, dtype=np.int64)
    ymax = np.sqrt(np.maximum(m_max - x * x, 0)).astype(np.int64)
    ymax -= ymax * ymax > m_max - x * x
    lens = 2 * ymax + 1
    xs = np.repeat(x, lens)
    starts = np.cumsum(lens) - lens
    ys = np.arange(lens.sum(), dtype=np.int64) - np.repeat(starts, lens) - np.repeat(ymax, lens)
    m = xs * xs + ys * ys
    keep = m > 0
    xs, ys, m = xs[keep], ys[keep], m[keep]
    theta = np.mod(np.arctan2(ys, xs), TWO_PI)
    order = np.lexsort((theta, m))
    m, theta = m[order], theta[order]
    del xs, ys, order

    first = np.flatnonzero(np.r_[True, m[1:] != m[:-1]])
    counts = np.diff(np.r_[first, len(m)])
    group_of = np.repeat(np.arange(len(first)), counts)
    pos = np.arange(len(m)) - first[group_of]
    c = counts[group_of]
    wrap = pos + 2 >= c
    j = np.where(wrap, np.arange(len(m)) + 2 - c, np.arange(len(m)) + 2)
    arcs = theta[j] - theta + np.where(wrap, TWO_PI, 0.0)
    arcs[c < 3] = np.inf
    min_arc = np.minimum.reduceat(arcs, first)
    mm = m[first]
    ok = counts >= 3
    return mm[ok], counts[ok], min_arc[ok] * np.sqrt(mm[ok].astype(np.float64))


def iter_shells(d: int, m_max: int, m_min: int = 1):
    """Yield every non-empty shell with m_min <= m <= m_max, from one bulk pass."""
    s = math.isqrt(m_max)
    axis = np.arange(-s, s + 1, dtype=np.int64)
    grids = np.meshgrid(*([axis] * (d - 1)), indexing="ij")
    tail = np.column_stack([g.ravel() for g in grids])
    tail_sq = np.einsum("ij,ij->i", tail, tail)
    blocks, norms = [], []
    for x in axis:
        n = x * x + tail_sq
        hit = (n <= m_max) & (n >= m_min)
        if np.any(hit):
            blocks.append(np.column_stack([np.full(int(hit.sum()), x), tail[hit]]))
            norms.append(n[hit])
    if not blocks:
        return
    pts = np.vstack(blocks)
    norm = np.concatenate(norms)
    order = np.lexsort(tuple(pts[:, k] for k in range(d - 1, -1, -1)) + (norm,))
    pts, norm = pts[order], norm[order]
    first = np.flatnonzero(np.r_[True, norm[1:] != norm[:-1]])
    ends = np.r_[first[1:], len(norm)]
    for a, b in zip(first, ends):
        block = pts[a:b]
        block.setflags(write=False)
        yield Shell(ShellSpec(d, int(norm[a])), block)


def coplanar_cap_sweep(m_max: int, scale: float = 0.5, exponent: float = 0.125,
                       m_min: int = 1):
    """Check that point-centred caps of chordal radius scale*m^exponent are coplanar.

    Returns ``(counterexamples, largest_cap, shells_checked)`` where each
    counterexample is ``(m, center_point, cap_points)``.
    """
    bad = []
    largest = 0
    checked = 0
    for shell in iter_shells(3, m_max, m_min):
        checked += 1
        r = scale * shell.m ** exponent
        pts = shell.points
        tree = cKDTree(pts.astype(np.float64))
        members = tree.query_ball_point(pts.astype(np.float64), r)
        for i, idx in enumerate(members):
            largest = max(largest, len(idx))
            if len(idx) > 3 and not coplanarity_check(pts[idx]):
                bad.append((shell.m, tuple(pts[i].tolist()), pts[idx].tolist()))
    return bad, largest, checked
