"""Restriction of toral eigenfunctions to a curved hypersurface.

For phi(x) = sum_n c_n e(n . x) with frequencies on one shell,

    int_Sigma |phi|^2 dsigma = sum_{i,j} c_i conj(c_j) sigma_hat(n_j - n_i),

so the restriction norm is the Hermitian form of the Gram matrix
G_ij = sigma_hat(n_j - n_i). Its extreme eigenvalues are the best constants
in  c ||phi||^2 <= ||phi||^2_{L^2(Sigma)} <= C ||phi||^2  for that shell.
"""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from .cap_stats import cluster_partition
from .lattice_shell import Shell, ShellSpec, enumerate_shell
from .surface import (DEFAULT_TOL, GAUSS_ORDER, Hypersurface, QuadratureError,
                      composite_gauss, sigma_hat_values, _ellipsoid_weight,
                      _sphere_grid)

log = logging.getLogger(__name__)

EIG_RESIDUAL = 1e-8
DEFAULT_MAX_GRAM = 4000


@dataclass
class CoefficientVector:
    """Amplitudes phi_hat(n) on a list of lattice points (rows of ``points``)."""

    points: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=complex)
        if self.points.ndim != 2 or len(self.points) != len(self.values):
            raise ValueError("need one amplitude per point")

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def is_normalized(self, tol: float = 1e-12) -> bool:
        return abs(self.norm ** 2 - 1.0) <= tol

    def aligned_to(self, index: np.ndarray) -> np.ndarray:
        """Amplitudes placed on the rows of ``index``; zero elsewhere."""
        lookup = {tuple(p): k for k, p in enumerate(np.asarray(index).tolist())}
        out = np.zeros(len(index), dtype=complex)
        for p, v in zip(self.points.tolist(), self.values):
            k = lookup.get(tuple(p))
            if k is None:
                raise ValueError(f"coefficient support point {tuple(p)} is not in the Gram index")
            out[k] += v
        return out


@dataclass
class GramMatrix:
    index: np.ndarray
    entries: np.ndarray
    tol: float

    def __len__(self):
        return len(self.index)


@dataclass
class RestrictionSweepRecord:
    m: int
    shell_size: int
    lambda_min: float
    lambda_max: float
    offdiag_total: float
    c_est: float
    C_est: float
    n_groups: int = 0
    max_group: int = 0
    restricted: bool = False

    def as_dict(self) -> dict:
        return asdict(self)


def gram_matrix(points, surface: Hypersurface, tol: float = DEFAULT_TOL) -> GramMatrix:
    """G_ij = sigma_hat(n_j - n_i), exactly Hermitian by construction."""
    pts = np.asarray(points, dtype=np.int64)
    if pts.ndim != 2 or pts.shape[1] != surface.d:
        raise ValueError(f"points must be an (n, {surface.d}) array")
    n = len(pts)
    if len({tuple(p) for p in pts.tolist()}) != n:
        raise ValueError("Gram points must be distinct")
    iu, ju = np.triu_indices(n, k=1)
    G = np.eye(n, dtype=complex)
    if len(iu):
        vals = sigma_hat_values(surface, (pts[ju] - pts[iu]).astype(np.float64), tol)
        G[iu, ju] = vals
        G[ju, iu] = np.conj(vals)
    return GramMatrix(pts, G, tol)


def restriction_norm_sq(coeffs: CoefficientVector, gram: GramMatrix) -> float:
    """The Hermitian form sum_ij c_i conj(c_j) G_ij (real by Hermitian symmetry)."""
    v = coeffs.aligned_to(gram.index)
    return float(np.real(v @ gram.entries @ np.conj(v)))


# --------------------------------------------------------------------------
# direct quadrature of |phi|^2 over the surface

def surface_nodes(surface: Hypersurface, resolution: int):
    """Quadrature nodes on Sigma with weights summing to one.

    The grid is fixed in space (it does not depend on any frequency), which
    keeps it independent of the frequency-aligned rule inside sigma_hat.
    """
    a = np.array(surface.semi_axes)
    x0 = np.array(surface.center)
    if surface.d == 2:
        n = GAUSS_ORDER * resolution
        theta = 2 * np.pi * np.arange(n) / n
        c, s = np.cos(theta), np.sin(theta)
        speed = np.sqrt((a[0] * s) ** 2 + (a[1] * c) ** 2)
        nodes = x0 + np.column_stack([a[0] * c, a[1] * s])
        w = speed / speed.sum()
        return nodes, w
    u, _, w = _sphere_grid(resolution, 2 * GAUSS_ORDER * resolution)
    w = w * _ellipsoid_weight(a, u)
    nodes = x0 + u.reshape(-1, 3) * a
    w = w.ravel()
    return nodes, w / w.sum()


def _direct_values(points: np.ndarray, V: np.ndarray, surface: Hypersurface, resolution: int,
                   chunk: int = 1 << 15) -> np.ndarray:
    nodes, w = surface_nodes(surface, resolution)
    out = np.zeros(V.shape[1])
    for start in range(0, len(nodes), chunk):
        x = nodes[start:start + chunk]
        E = np.exp(2j * np.pi * (x @ points.T.astype(np.float64)))
        phi = E @ V
        out += w[start:start + chunk] @ (np.abs(phi) ** 2)
    return out


def direct_restriction_norms(points, V: np.ndarray, surface: Hypersurface,
                             tol: float = DEFAULT_TOL, max_resolution: int = 1 << 10) -> np.ndarray:
    """int_Sigma |sum_n V[n, k] e(n . x)|^2 dsigma for every column k of V."""
    pts = np.asarray(points, dtype=np.int64)
    V = np.asarray(V, dtype=complex).reshape(len(pts), -1)
    if len(pts) == 0:
        return np.zeros(V.shape[1])
    top = float(np.max(np.linalg.norm(pts, axis=1)))
    res = 1 + math.ceil(2 * top * surface.diameter)
    prev = _direct_values(pts, V, surface, res)
    while 2 * res <= max_resolution:
        res *= 2
        cur = _direct_values(pts, V, surface, res)
        if np.max(np.abs(cur - prev)) <= tol:
            return cur
        prev = cur
    raise QuadratureError(f"direct restriction quadrature did not reach tol={tol:g}")


def direct_restriction_norm_sq(coeffs: CoefficientVector, surface: Hypersurface,
                               tol: float = DEFAULT_TOL) -> float:
    """Quadrature of |phi|^2 over Sigma, bypassing the Gram factorisation."""
    if not np.any(coeffs.values):
        return 0.0
    return float(direct_restriction_norms(coeffs.points, coeffs.values[:, None], surface, tol)[0])


# --------------------------------------------------------------------------
# spectra and certificates

def extreme_eigenvalues(gram) -> tuple[float, float]:
    """(lambda_min, lambda_max) of a Hermitian Gram matrix.

    Uses LAPACK's Hermitian eigensolver and checks the residual
    ||G v - lambda v|| <= 1e-8 ||G|| for both extremal pairs.
    """
    G = gram.entries if isinstance(gram, GramMatrix) else np.asarray(gram, dtype=complex)
    tol = gram.tol if isinstance(gram, GramMatrix) else 1e-12
    if G.ndim != 2 or G.shape[0] != G.shape[1]:
        raise ValueError("Gram matrix must be square")
    skew = float(np.max(np.abs(G - G.conj().T))) if G.size else 0.0
    if skew > 2 * tol:
        raise ValueError(f"matrix is not Hermitian (deviation {skew:.3g})")
    H = (G + G.conj().T) / 2
    w, vecs = np.linalg.eigh(H)
    scale = max(float(np.linalg.norm(H, 2)), 1e-300)
    for k in (0, -1):
        res = np.linalg.norm(H @ vecs[:, k] - w[k] * vecs[:, k])
        if res > EIG_RESIDUAL * scale:
            raise ArithmeticError(f"eigenpair residual {res:.3g} exceeds contract")
    return float(w[0]), float(w[-1])


def cluster_threshold(m: int) -> float:
    """Default linking threshold 2 lam^{1/3}."""
    return 2.0 * m ** (1.0 / 6.0)


def certificate_from_gram(gram: GramMatrix, labels: np.ndarray) -> tuple[float, float, float]:
    """(c_est, C_est, T) from the block-diagonal part and a row-sum bound T.

    By Weyl's inequality the spectrum of G lies within T of the union of
    the block spectra, where T bounds the norm of the inter-group part.
    The interval is widened by n eps ||G||_1 so that it also covers the
    rounding error of the computed eigenvalues (ties such as
    lambda_max = 1 + T are common on small symmetric shells).
    """
    G = gram.entries
    between = labels[:, None] != labels[None, :]
    T = float(np.max(np.sum(np.abs(G) * between, axis=1))) if len(G) else 0.0
    lo, hi = math.inf, -math.inf
    for lab in np.unique(labels):
        idx = np.flatnonzero(labels == lab)
        a, b = extreme_eigenvalues(G[np.ix_(idx, idx)])
        lo, hi = min(lo, a), max(hi, b)
    pad = len(G) * np.finfo(float).eps * float(np.max(np.sum(np.abs(G), axis=1))) if len(G) else 0.0
    return lo - T - pad, hi + T + pad, T


def cluster_certificate(shell: Shell, surface: Hypersurface, threshold: float | None = None,
                        tol: float = DEFAULT_TOL, gram: GramMatrix | None = None) -> RestrictionSweepRecord:
    """Cluster-decomposition bounds on the restriction constants of one shell."""
    if len(shell) == 0:
        raise ValueError("shell is empty")
    if threshold is None:
        threshold = cluster_threshold(shell.m)
    part = cluster_partition(shell, threshold)
    if gram is None:
        gram = gram_matrix(shell.points, surface, tol)
    c_est, C_est, T = certificate_from_gram(gram, part.labels)
    lam_min, lam_max = extreme_eigenvalues(gram)
    sizes = part.sizes()
    return RestrictionSweepRecord(shell.m, len(shell), lam_min, lam_max, T, c_est, C_est,
                                  len(sizes), max(sizes))


def random_coefficients(points, seed: int) -> CoefficientVector:
    """Uniform sample on the unit sphere of C^n: normalised complex Gaussian."""
    pts = np.asarray(points, dtype=np.int64)
    if len(pts) == 0:
        raise ValueError("no points to carry coefficients")
    rng = np.random.default_rng(seed)
    z = rng.standard_normal(len(pts)) + 1j * rng.standard_normal(len(pts))
    return CoefficientVector(pts, z / np.linalg.norm(z))


def _cap_restricted(shell: Shell, max_points: int) -> np.ndarray:
    # the max_points shell points nearest the first one (a cap around it)
    dist = np.linalg.norm(shell.points - shell.points[0], axis=1)
    keep = np.sort(np.argsort(dist, kind="stable")[:max_points])
    return shell.points[keep]


def theorem1_sweep(surface: Hypersurface, m_list, tol: float = DEFAULT_TOL,
                   max_gram: int = DEFAULT_MAX_GRAM) -> list[RestrictionSweepRecord]:
    """Full-Gram extreme eigenvalues and the cluster certificate for each m."""
    records = []
    for m in m_list:
        rec = restriction_record(surface, int(m), tol, max_gram)
        if rec is not None:
            records.append(rec)
    return records


def restriction_record(surface: Hypersurface, m: int, tol: float = DEFAULT_TOL,
                       max_gram: int = DEFAULT_MAX_GRAM) -> RestrictionSweepRecord | None:
    shell = enumerate_shell(ShellSpec(surface.d, m))
    if len(shell) == 0:
        log.warning("shell d=%d m=%d is empty; skipped", surface.d, m)
        return None
    restricted = len(shell) > max_gram
    if restricted:
        shell = Shell(shell.spec, _cap_restricted(shell, max_gram))
    rec = cluster_certificate(shell, surface, cluster_threshold(m), tol)
    rec.restricted = restricted
    return rec
