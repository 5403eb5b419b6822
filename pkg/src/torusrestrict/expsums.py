"""Direct evaluation of the bilinear and cap-pair exponential sums, with
log-log exponent fitting for sweeps."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

import numpy as np

from .cap_stats import Cap
from .lattice_shell import Shell
from .restriction import CoefficientVector
from .surface import Hypersurface, support_function_many

PATTERNS = ("maximal_grid", "random_greedy", "perturbed_grid")
MAGNITUDE_FLOOR = 1e-30
_ROW_CHUNK = 256


@dataclass(frozen=True)
class SeparatedSet:
    """Points of [0, 1] with consecutive gaps strictly larger than beta^{-1/2}."""

    beta: float
    points: tuple

    def __post_init__(self):
        pts = tuple(sorted(float(p) for p in self.points))
        gap = self.beta ** -0.5
        if any(p < 0.0 or p > 1.0 for p in pts):
            raise ValueError("separated-set points must lie in [0, 1]")
        if any(b - a <= gap for a, b in zip(pts, pts[1:])):
            raise ValueError(f"consecutive points must be more than {gap:g} apart")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return len(self.points)

    @property
    def array(self) -> np.ndarray:
        return np.array(self.points)


@dataclass
class SumRecord:
    parameter: float
    magnitude: float
    trivial_bound: float
    normalized: float


def _unit(phase: np.ndarray) -> np.ndarray:
    """e(phase) after reducing the (extended-precision) phase mod 1."""
    frac = np.mod(phase, 1)
    return np.exp(2j * np.pi * frac.astype(np.float64))


def _fsum_complex(z: np.ndarray) -> complex:
    return complex(math.fsum(z.real.ravel()), math.fsum(z.imag.ravel()))


def _points(S, beta: float) -> np.ndarray:
    if isinstance(S, SeparatedSet):
        if S.beta != beta:
            raise ValueError("separated set was built for a different beta")
        S = S.points
    return np.array(S, dtype=np.longdouble).ravel()


def bilinear_sum(beta: float, X, Y, nonlinear: bool = True) -> complex:
    """sum_{x in X} sum_{y in Y} e(beta x y + beta^{1/3} x^2 y^2).

    X and Y are SeparatedSets for this beta, or plain sequences of reals
    (taken as given, without a separation check). With ``nonlinear=False``
    only the beta x y part of the phase is kept.
    """
    x, y = _points(X, beta), _points(Y, beta)
    b = np.longdouble(beta)
    b3 = np.cbrt(b) if nonlinear else np.longdouble(0)
    parts = []
    for start in range(0, len(x), _ROW_CHUNK):
        xy = x[start:start + _ROW_CHUNK, None] * y[None, :]
        parts.append(_unit(b * xy + b3 * xy * xy))
    if not parts:
        return 0j
    return _fsum_complex(np.concatenate([p.ravel() for p in parts]))


def maximal_grid_step(beta: float) -> int:
    """Largest k with 1/k > beta^{-1/2}, i.e. k < sqrt(beta); 0 when beta <= 1."""
    root = math.isqrt(int(beta)) if float(beta).is_integer() else None
    if root is not None and root * root == int(beta):
        return max(root - 1, 0)
    return max(math.ceil(math.sqrt(beta)) - 1, 0)


def separated_set(beta: float, pattern: str = "maximal_grid", seed: int = 0) -> SeparatedSet:
    """A beta^{-1/2}-separated subset of [0, 1].

    maximal_grid: {j/k} with the finest admissible 1/k spacing.
    random_greedy: uniform proposals accepted when they keep the gap, until
    a long run of rejections signals saturation.
    perturbed_grid: the finest 1/k grid whose spacing exceeds twice the gap,
    each point moved by up to a quarter of the spacing.
    """
    if beta < 1:
        raise ValueError("beta must be at least 1")
    gap = beta ** -0.5
    if pattern == "maximal_grid":
        k = maximal_grid_step(beta)
        if k == 0:
            return SeparatedSet(beta, (0.0,))
        return SeparatedSet(beta, tuple(j / k for j in range(k + 1)))
    rng = np.random.default_rng(seed)
    if pattern == "random_greedy":
        pts: list[float] = []
        patience = max(1000, 20 * math.ceil(1 / gap))
        misses = 0
        while misses < patience:
            p = float(rng.random())
            i = bisect.bisect_left(pts, p)
            if (i > 0 and p - pts[i - 1] <= gap) or (i < len(pts) and pts[i] - p <= gap):
                misses += 1
                continue
            pts.insert(i, p)
            misses = 0
        return SeparatedSet(beta, tuple(pts))
    if pattern == "perturbed_grid":
        k = math.ceil(1 / (2 * gap)) - 1
        if k == 0:
            return SeparatedSet(beta, (float(rng.random()),))
        step = 1.0 / k
        base = np.arange(k + 1) * step
        jitter = rng.uniform(-0.25, 0.25, size=k + 1) * step
        pts = np.clip(base + jitter, 0.0, 1.0)
        return SeparatedSet(beta, tuple(pts.tolist()))
    raise ValueError(f"unknown pattern {pattern!r}; expected one of {PATTERNS}")


def check_cap_separation(lam: float, capA: Cap, capB: Cap, factor: float = 10.0) -> float:
    """Distance between two chordal caps on the radius-lam sphere; raises if < factor * r."""
    r = max(capA.size_r, capB.size_r)
    centers = lam * (np.asarray(capA.center) - np.asarray(capB.center))
    dist = max(0.0, float(np.linalg.norm(centers)) - capA.size_r - capB.size_r)
    if dist < factor * r:
        raise ValueError(f"caps are {dist:.4g} apart, need at least {factor:g} * r = {factor * r:.4g}")
    return dist


def cap_pair_sum(shell: Shell, surface: Hypersurface, capA: Cap, capB: Cap,
                 coeffs: CoefficientVector, min_separation: float = 10.0) -> complex:
    """sum over n in capA, n' in capB of c(n) conj(c(n')) e(h(n - n')).

    h is the support function of ``surface``. Points without a coefficient
    count as zero amplitude.
    """
    if surface.d != shell.d or len(capA.center) != shell.d or len(capB.center) != shell.d:
        raise ValueError("shell, surface and caps must share a dimension")
    check_cap_separation(shell.radius, capA, capB, min_separation)
    ia, ib = capA.members(shell), capB.members(shell)
    if len(ia) == 0 or len(ib) == 0:
        return 0j
    lookup = {tuple(p): v for p, v in zip(coeffs.points.tolist(), coeffs.values)}
    shell_keys = {tuple(p) for p in shell.points.tolist()}
    if any(k not in shell_keys for k in lookup):
        raise ValueError("coefficient support is not contained in the shell")
    pa, pb = shell.points[ia], shell.points[ib]
    ca = np.array([lookup.get(tuple(p), 0j) for p in pa.tolist()])
    cb = np.array([lookup.get(tuple(p), 0j) for p in pb.tolist()])
    diff = (pa[:, None, :] - pb[None, :, :]).reshape(-1, shell.d)
    h = support_function_many(surface, diff).reshape(len(pa), len(pb))
    terms = ca[:, None] * np.conj(cb)[None, :] * _unit(np.asarray(h, dtype=np.longdouble))
    return _fsum_complex(terms)


def exponent_fit(records, floor: float = MAGNITUDE_FLOOR) -> tuple[float, float, float]:
    """Least-squares slope and intercept of log(magnitude) vs log(parameter), plus RMS residual."""
    pairs = [(r.parameter, max(r.magnitude, floor)) for r in records if r.parameter > 0]
    if len({p for p, _ in pairs}) < 3:
        raise ValueError("need at least three records with distinct positive parameters")
    x = np.log([p for p, _ in pairs])
    y = np.log([v for _, v in pairs])
    A = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = float(np.sqrt(np.mean((A @ [slope, intercept] - y) ** 2)))
    return float(slope), float(intercept), resid
