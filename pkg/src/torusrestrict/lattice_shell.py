"""Exact enumeration of lattice points on spheres x_1^2 + ... + x_d^2 = m.

Shells are indexed by the integer norm-square ``m`` (so the radius is
``sqrt(m)``) and dimension ``d`` in 2..5. Points are returned as an
``(n, d)`` int64 array in lexicographic order.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from itertools import permutations, product

import numpy as np

DIMENSIONS = (2, 3, 4, 5)
DEFAULT_MAX_POINTS = 10_000_000

# Vectorised integer square roots go through float64 with an exact int64
# correction; (y + 1)^2 must still fit in int64, so beyond this bound we fall
# back to math.isqrt.
_FLOAT_SAFE = 2**62
_CHUNK = 1 << 20


class ShellCapacityError(MemoryError):
    """Raised when a shell is predicted to exceed the point budget."""


@dataclass(frozen=True)
class ShellSpec:
    d: int
    m: int

    def __post_init__(self):
        if self.d not in DIMENSIONS:
            raise ValueError(f"dimension must be one of {DIMENSIONS}, got {self.d}")
        if int(self.m) != self.m or self.m < 0:
            raise ValueError(f"norm-square must be a non-negative integer, got {self.m}")
        object.__setattr__(self, "m", int(self.m))

    @property
    def radius(self) -> float:
        return math.sqrt(self.m)


@dataclass(frozen=True)
class Shell:
    spec: ShellSpec
    points: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.points)

    @property
    def d(self) -> int:
        return self.spec.d

    @property
    def m(self) -> int:
        return self.spec.m

    @property
    def radius(self) -> float:
        return self.spec.radius

    def as_tuples(self) -> list[tuple[int, ...]]:
        return [tuple(int(c) for c in p) for p in self.points]


def _isqrt_array(r: np.ndarray) -> np.ndarray:
    """Floor square roots of a non-negative int64 array."""
    y = np.sqrt(r.astype(np.float64)).astype(np.int64)
    y -= (y * y > r)
    y += ((y + 1) * (y + 1) <= r)
    return y


def _two_square_solutions(m: int) -> np.ndarray:
    """All (x, y) with x^2 + y^2 = m, lexicographically sorted."""
    s = math.isqrt(m)
    if m >= _FLOAT_SAFE:
        rows = []
        for x in range(-s, s + 1):
            rem = m - x * x
            y = math.isqrt(rem)
            if y * y == rem:
                rows.extend([(x, -y), (x, y)] if y else [(x, 0)])
        return np.array(rows, dtype=np.int64).reshape(-1, 2)
    xs_parts, ys_parts = [], []
    for lo in range(-s, s + 1, _CHUNK):
        x = np.arange(lo, min(lo + _CHUNK, s + 1), dtype=np.int64)
        rem = m - x * x
        y = _isqrt_array(rem)
        hit = y * y == rem
        x, y = x[hit], y[hit]
        pos = y > 0
        xs_parts += [x, x[pos]]
        ys_parts += [-y, y[pos]]
    xs = np.concatenate(xs_parts)
    ys = np.concatenate(ys_parts)
    order = np.lexsort((ys, xs))
    return np.column_stack([xs[order], ys[order]])


def _solutions(d: int, m: int) -> np.ndarray:
    if d == 2:
        return _two_square_solutions(m)
    s = math.isqrt(m)
    blocks = []
    for x in range(-s, s + 1):
        tail = _solutions(d - 1, m - x * x)
        if len(tail):
            head = np.full((len(tail), 1), x, dtype=np.int64)
            blocks.append(np.hstack([head, tail]))
    if not blocks:
        return np.empty((0, d), dtype=np.int64)
    return np.vstack(blocks)


def predicted_count(spec: ShellSpec) -> float:
    """Leading-order size estimate: surface area of the radius-sqrt(m) sphere."""
    d, m = spec.d, spec.m
    if d == 2:
        # r_2(m) = O(m^eps); the divisor bound is a safe overestimate
        return 4.0 * (1 + m) ** 0.25
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2) * m ** ((d - 2) / 2)


def enumerate_shell(spec: ShellSpec, max_points: int = DEFAULT_MAX_POINTS) -> Shell:
    """All integer points on the shell ``spec``, sorted lexicographically."""
    if predicted_count(spec) > max_points:
        raise ShellCapacityError(
            f"shell d={spec.d}, m={spec.m} predicted to hold "
            f"~{predicted_count(spec):.3g} points (budget {max_points})"
        )
    if spec.m == 0:
        return Shell(spec, np.zeros((1, spec.d), dtype=np.int64))
    pts = _solutions(spec.d, spec.m)
    pts.setflags(write=False)
    return Shell(spec, pts)


def _count(d: int, m: int) -> int:
    if m == 0:
        return 1
    s = math.isqrt(m)
    if d == 2:
        if m >= _FLOAT_SAFE:
            return len(_two_square_solutions(m))
        total = 0
        for lo in range(-s, s + 1, _CHUNK):
            x = np.arange(lo, min(lo + _CHUNK, s + 1), dtype=np.int64)
            rem = m - x * x
            y = _isqrt_array(rem)
            hit = y * y == rem
            total += int(np.count_nonzero(hit) + np.count_nonzero(hit & (y > 0)))
        return total
    if d == 3 and m < _CHUNK**2:
        # two leading coordinates at once, perfect-square test on the rest
        x = np.arange(-s, s + 1, dtype=np.int64)
        rem = m - (x * x)[:, None] - (x * x)[None, :]
        ok = rem >= 0
        rem = np.where(ok, rem, 0)
        z = _isqrt_array(rem)
        hit = ok & (z * z == rem)
        return int(np.count_nonzero(hit) + np.count_nonzero(hit & (z > 0)))
    return sum(_count(d - 1, m - x * x) for x in range(-s, s + 1))


def shell_count(spec: ShellSpec) -> int:
    """Number of points on the shell, without building the point list."""
    return _count(spec.d, spec.m)


def _factorize(n: int) -> dict[int, int]:
    out: dict[int, int] = {}
    p = 2
    while p * p <= n:
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
        p += 1 if p == 2 else 2
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def two_squares_count_oracle(m: int) -> int:
    """r_2(m) = 4 (d_1(m) - d_3(m)) from the prime factorisation of m.

    d_1, d_3 count the divisors congruent to 1 and 3 mod 4. Multiplicatively
    this is 4 * prod over p = 1 mod 4 of (e+1), and zero as soon as some
    prime p = 3 mod 4 appears to an odd power. r_2(0) = 1 by convention.
    """
    if m < 0:
        raise ValueError("m must be non-negative")
    if m == 0:
        return 1
    total = 4
    for p, e in _factorize(m).items():
        if p % 4 == 1:
            total *= e + 1
        elif p % 4 == 3 and e % 2:
            return 0
    return total


def min_pairwise_distance(shell: Shell) -> float:
    if len(shell) < 2:
        raise ValueError("need at least two points for a pairwise distance")
    from scipy.spatial import cKDTree

    pts = shell.points.astype(np.float64)
    dist, _ = cKDTree(pts).query(pts, k=2)
    return float(np.min(dist[:, 1]))


def signed_permutations(d: int):
    """Yield every signed coordinate permutation as (perm, signs)."""
    for perm in permutations(range(d)):
        for signs in product((1, -1), repeat=d):
            yield perm, np.array(signs, dtype=np.int64)


def is_symmetric(shell: Shell) -> bool:
    """Closure of the point set under the hyperoctahedral group."""
    pts = shell.points
    keys = {tuple(p) for p in pts.tolist()}
    for perm, signs in signed_permutations(shell.d):
        moved = pts[:, perm] * signs
        if any(tuple(p) not in keys for p in moved.tolist()):
            return False
    return True
