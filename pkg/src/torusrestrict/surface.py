"""Curved model hypersurfaces in the unit torus and Fourier transforms of
their normalised surface measure.

All transforms use the convention

    sigma_hat(xi) = int_Sigma e(-xi . x) dsigma(x),   e(z) = exp(2 pi i z),

with sigma of total mass one. Supported surfaces are axis-aligned quadrics:
circles and ellipses in the plane, spheres and ellipsoids in space. Each is
the image ``x0 + A u`` of the unit sphere under ``A = diag(semi_axes)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .special import j0

KINDS = {"circle": 2, "ellipse": 2, "sphere": 3, "ellipsoid": 3}
DEFAULT_TOL = 1e-8
MAX_NODES = 1 << 24
GAUSS_ORDER = 16
ASYMPTOTIC_ERR_CONST = 1 / (2 * math.pi)


class QuadratureError(RuntimeError):
    """Node doubling failed to reach the requested tolerance."""


class BelowThresholdError(ValueError):
    """Stationary-phase evaluation requested at too small a frequency."""


@dataclass(frozen=True)
class Hypersurface:
    kind: str
    semi_axes: tuple
    center: tuple
    strict: bool = True

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown surface kind {self.kind!r}; expected one of {sorted(KINDS)}")
        d = KINDS[self.kind]
        axes = tuple(float(a) for a in self.semi_axes)
        center = tuple(float(c) for c in self.center)
        if len(axes) != d or len(center) != d:
            raise ValueError(f"{self.kind} needs {d} semi-axes and a {d}-dimensional center")
        if min(axes) <= 0:
            raise ValueError("semi-axes must be strictly positive")
        if self.kind in ("circle", "sphere") and len(set(axes)) != 1:
            raise ValueError(f"{self.kind} needs equal semi-axes")
        if self.strict:
            r = max(axes)
            for c in center:
                if not (0.0 < c - r and c + r < 1.0):
                    raise ValueError(
                        f"{self.kind} with center {center} and extent {r} "
                        "does not fit inside the fundamental domain (0,1)^d"
                    )
        object.__setattr__(self, "semi_axes", axes)
        object.__setattr__(self, "center", center)

    @property
    def d(self) -> int:
        return KINDS[self.kind]

    @property
    def diameter(self) -> float:
        return 2.0 * max(self.semi_axes)

    @property
    def min_axis(self) -> float:
        return min(self.semi_axes)

    @property
    def measure(self) -> float:
        """Total arc length (d=2) or area (d=3)."""
        return _measure(self.kind, self.semi_axes)

    def describe(self) -> str:
        names = "abc" if self.kind in ("ellipse", "ellipsoid") else ["rho"]
        parts = [f"{n}={a:g}" for n, a in zip(names, self.semi_axes)]
        parts += [f"c{ax}={c:g}" for ax, c in zip("xyz", self.center)]
        return f"{self.kind}:" + ",".join(parts)


def _default_center(d):
    return (0.5,) * d


def circle(rho: float, center=None, strict: bool = True) -> Hypersurface:
    return Hypersurface("circle", (rho, rho), center or _default_center(2), strict)


def ellipse(a: float, b: float, center=None, strict: bool = True) -> Hypersurface:
    return Hypersurface("ellipse", (a, b), center or _default_center(2), strict)


def sphere(rho: float, center=None, strict: bool = True) -> Hypersurface:
    return Hypersurface("sphere", (rho, rho, rho), center or _default_center(3), strict)


def ellipsoid(a: float, b: float, c: float, center=None, strict: bool = True) -> Hypersurface:
    return Hypersurface("ellipsoid", (a, b, c), center or _default_center(3), strict)


def parse_surface(text: str) -> Hypersurface:
    """Parse ``circle:rho=0.25,cx=0.5,cy=0.5`` style descriptions."""
    kind, _, rest = text.partition(":")
    kind = kind.strip()
    if kind not in KINDS:
        raise ValueError(f"unknown surface kind {kind!r}; expected one of {sorted(KINDS)}")
    d = KINDS[kind]
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise ValueError(f"malformed surface parameter {item!r}")
        params[key.strip()] = float(val)
    center = tuple(params.pop(f"c{ax}", 0.5) for ax in "xyz"[:d])
    if kind in ("circle", "sphere"):
        axes = (params.pop("rho"),) * d
    else:
        axes = tuple(params.pop(n) for n in "abc"[:d])
    if params:
        raise ValueError(f"unexpected surface parameters {sorted(params)} for {kind}")
    return Hypersurface(kind, axes, center)


@dataclass(frozen=True)
class FourierSample:
    xi: tuple
    value: complex
    method: str
    err_estimate: float


# --------------------------------------------------------------------------
# geometry

def curvature_range(surface: Hypersurface) -> tuple[float, float]:
    """Extremes of the curvature (d=2) or Gauss curvature (d=3).

    On x0 + A u the curvature is 1 / (prod a_i^2 * S^{(d+1)/2}) with
    S = sum x_i^2 / a_i^4, and S ranges over [1/a_max^2, 1/a_min^2].
    """
    a = np.array(surface.semi_axes)
    d = surface.d
    prod = float(np.prod(a * a))
    k_min = float(1.0 / (prod * (1.0 / a.min() ** 2) ** ((d + 1) / 2)))
    k_max = float(1.0 / (prod * (1.0 / a.max() ** 2) ** ((d + 1) / 2)))
    if k_min <= 0:
        raise ValueError("surface curvature is not bounded away from zero")
    return k_min, k_max


def support_function(surface: Hypersurface, xi) -> float:
    """h(xi) = max over x in Sigma of xi . x."""
    xi = np.asarray(xi, dtype=np.float64)
    if not np.any(xi):
        raise ValueError("support function needs a non-zero frequency")
    a = np.array(surface.semi_axes)
    return float(xi @ np.array(surface.center) + np.linalg.norm(a * xi))


def support_function_many(surface: Hypersurface, xis: np.ndarray) -> np.ndarray:
    xis = np.asarray(xis, dtype=np.float64)
    a = np.array(surface.semi_axes)
    return xis @ np.array(surface.center) + np.linalg.norm(xis * a, axis=-1)


# --------------------------------------------------------------------------
# quadrature rules

@lru_cache(maxsize=None)
def _gauss_base(order: int = GAUSS_ORDER):
    return np.polynomial.legendre.leggauss(order)


def composite_gauss(panels: int, order: int = GAUSS_ORDER):
    """Nodes and weights of a composite Gauss-Legendre rule on [-1, 1]."""
    x, w = _gauss_base(order)
    h = 1.0 / panels
    mids = -1.0 + h * (2 * np.arange(panels) + 1)
    nodes = (mids[:, None] + h * x[None, :]).ravel()
    weights = np.tile(h * w, panels)
    return nodes, weights


def _ellipsoid_weight(a: np.ndarray, u: np.ndarray) -> np.ndarray:
    # area element of x0 + A u relative to dS(u): det(A) |A^{-1} u|
    return float(np.prod(a)) * np.linalg.norm(u / a, axis=-1)


def _frame(axis: np.ndarray):
    """Orthonormal (e1, e2, e3) with e3 along ``axis``."""
    n = np.linalg.norm(axis)
    e3 = axis / n if n > 0 else np.array([0.0, 0.0, 1.0])
    helper = np.eye(3)[int(np.argmin(np.abs(e3)))]
    e1 = np.cross(e3, helper)
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(e3, e1)
    return e1, e2, e3


def _sphere_grid(panels: int, n_phi: int, axis=None):
    """Product rule on S^2: composite Gauss in t = cos(polar), trapezoid in azimuth.

    Returns unit vectors of shape (n_t, n_phi, 3), t nodes, and weights of
    shape (n_t, n_phi) that sum to 4 pi.
    """
    t, wt = composite_gauss(panels)
    phi = 2 * np.pi * np.arange(n_phi) / n_phi
    e1, e2, e3 = _frame(np.asarray(axis if axis is not None else (0.0, 0.0, 1.0), dtype=float))
    s = np.sqrt(1.0 - t * t)
    u = (t[:, None, None] * e3
         + (s[:, None] * np.cos(phi)[None, :])[..., None] * e1
         + (s[:, None] * np.sin(phi)[None, :])[..., None] * e2)
    w = wt[:, None] * np.full(n_phi, 2 * np.pi / n_phi)[None, :]
    return u, t, w


@lru_cache(maxsize=64)
def _measure(kind: str, axes: tuple) -> float:
    a = np.array(axes)
    if kind == "circle":
        return 2 * math.pi * a[0]
    if kind == "sphere":
        return 4 * math.pi * a[0] ** 2
    if kind == "ellipse":
        from scipy.special import ellipe

        hi, lo = max(a), min(a)
        return 4 * hi * float(ellipe(1.0 - (lo / hi) ** 2))
    prev = None
    panels, n_phi = 8, 32
    while True:
        u, _, w = _sphere_grid(panels, n_phi)
        val = float(np.sum(w * _ellipsoid_weight(a, u)))
        if prev is not None and abs(val - prev) <= 1e-14 * val:
            return val
        prev, panels, n_phi = val, 2 * panels, 2 * n_phi


def _base_resolution(surface: Hypersurface, freq: float) -> int:
    """Oscillation-resolving size parameter 1 + |xi| diam (rounded up)."""
    return 1 + math.ceil(freq * surface.diameter)


# --------------------------------------------------------------------------
# sigma_hat by quadrature

def _planar_integral(surface: Hypersurface, xi: np.ndarray, n: int) -> complex:
    a, b = surface.semi_axes
    theta = 2 * np.pi * np.arange(n) / n
    c, s = np.cos(theta), np.sin(theta)
    speed = np.sqrt((a * s) ** 2 + (b * c) ** 2)
    phase = xi[0] * a * c + xi[1] * b * s
    total = np.sum(speed * np.exp(-2j * np.pi * phase)) * (2 * np.pi / n)
    return complex(total / surface.measure)


def _spatial_integral(surface: Hypersurface, xi: np.ndarray, panels: int, n_phi: int) -> complex:
    # polar axis along eta = A xi so that the phase depends on t alone
    a = np.array(surface.semi_axes)
    eta = a * xi
    k = float(np.linalg.norm(eta))
    if surface.kind == "sphere":
        t, wt = composite_gauss(panels)
        radial = 2 * np.pi * a[0] ** 2 * wt
    else:
        u, t, w = _sphere_grid(panels, n_phi, axis=eta if k > 0 else None)
        radial = np.sum(w * _ellipsoid_weight(a, u), axis=1)
    total = np.sum(radial * np.exp(-2j * np.pi * k * t))
    return complex(total / surface.measure)


def _center_phase(surface: Hypersurface, xi: np.ndarray) -> complex:
    return complex(np.exp(-2j * np.pi * float(xi @ np.array(surface.center))))


def sigma_hat(surface: Hypersurface, xi, tol: float = DEFAULT_TOL,
              max_nodes: int = MAX_NODES) -> FourierSample:
    """Fourier transform of the normalised surface measure by quadrature.

    Planar curves use the periodic trapezoid rule in the ellipse angle;
    surfaces use composite Gauss in the polar cosine (polar axis along
    ``A xi``) times the periodic trapezoid rule in azimuth. The node count
    starts at 16 (1 + |xi| diam) and is doubled until two successive
    estimates agree to ``tol``.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    xi = np.asarray(xi, dtype=np.float64)
    if xi.shape != (surface.d,):
        raise ValueError(f"frequency must have length {surface.d}")
    key = tuple(float(v) for v in xi)
    if not np.any(xi):
        return FourierSample(key, 1.0 + 0.0j, "quadrature", 0.0)
    base = _base_resolution(surface, float(np.linalg.norm(xi)))
    if surface.d == 2:
        n = GAUSS_ORDER * base
        prev = _planar_integral(surface, xi, n)
        while 2 * n <= max_nodes:
            n *= 2
            cur = _planar_integral(surface, xi, n)
            err = abs(cur - prev)
            if err <= tol:
                return FourierSample(key, _center_phase(surface, xi) * cur, "quadrature", err)
            prev = cur
    else:
        panels, n_phi = base, 16
        prev = _spatial_integral(surface, xi, panels, n_phi)
        while GAUSS_ORDER * 2 * panels * 2 * n_phi <= max_nodes:
            panels, n_phi = 2 * panels, 2 * n_phi
            cur = _spatial_integral(surface, xi, panels, n_phi)
            err = abs(cur - prev)
            if err <= tol:
                return FourierSample(key, _center_phase(surface, xi) * cur, "quadrature", err)
            prev = cur
    raise QuadratureError(
        f"sigma_hat at xi={key} did not reach tol={tol:g} within {max_nodes} nodes"
    )


# --------------------------------------------------------------------------
# closed forms and the stationary-phase leading term

def _has_closed_form(surface: Hypersurface) -> bool:
    return surface.kind in ("circle", "sphere")


def closed_form_values(surface: Hypersurface, xis: np.ndarray) -> np.ndarray:
    """Vectorised closed-form sigma_hat for circles and spheres."""
    if not _has_closed_form(surface):
        raise ValueError(f"no closed form for {surface.kind}")
    xis = np.asarray(xis, dtype=np.float64)
    rho = surface.semi_axes[0]
    k = np.linalg.norm(xis, axis=-1)
    if surface.kind == "circle":
        radial = j0(2 * np.pi * rho * k)
    else:
        radial = np.sinc(2 * rho * k)  # numpy sinc is sin(pi x)/(pi x)
    phase = np.exp(-2j * np.pi * (xis @ np.array(surface.center)))
    return phase * radial


def sigma_hat_closed_form(surface: Hypersurface, xi) -> FourierSample:
    xi = np.asarray(xi, dtype=np.float64)
    value = complex(closed_form_values(surface, xi[None, :])[0])
    return FourierSample(tuple(float(v) for v in xi), value, "closed_form", 0.0)


def asymptotic_threshold(surface: Hypersurface) -> float:
    return 10.0 / surface.min_axis


def sigma_hat_asymptotic(surface: Hypersurface, xi, threshold: float | None = None) -> FourierSample:
    """Leading stationary-phase term of sigma_hat.

    The two critical points of x -> xi . x on Sigma are x_+- = x0 +- A^2 xi/|A xi|,
    where the outward normal is +-xi/|xi|. With K the (Gauss) curvature there
    and |Sigma| the total measure,

        sigma_hat(xi) ~ K^{-1/2} |xi|^{-(d-1)/2} / |Sigma|
                        * [e(-xi.x_+ + (d-1)/8) + e(-xi.x_- - (d-1)/8)].

    At x_+ the phase -xi.x has a minimum (Hessian signature +(d-1)), at x_-
    a maximum; this fixes the signs of the (d-1)/8 shifts. For the sphere
    the sum reproduces sin(2 pi rho|xi|)/(2 pi rho|xi|) exactly.
    """
    xi = np.asarray(xi, dtype=np.float64)
    k = float(np.linalg.norm(xi))
    limit = asymptotic_threshold(surface) if threshold is None else threshold
    if k < limit:
        raise BelowThresholdError(f"|xi| = {k:g} is below the asymptotic threshold {limit:g}")
    d = surface.d
    a = np.array(surface.semi_axes)
    eta = float(np.linalg.norm(a * xi))
    curvature = eta ** (d + 1) / (float(np.prod(a * a)) * k ** (d + 1))
    amp = curvature ** -0.5 * k ** (-(d - 1) / 2) / surface.measure
    shift = (d - 1) / 8
    value = _center_phase(surface, xi) * amp * 2 * math.cos(2 * math.pi * (eta - shift))
    err = 2 * amp * ASYMPTOTIC_ERR_CONST / (k * surface.min_axis)
    return FourierSample(tuple(float(v) for v in xi), complex(value), "asymptotic", err)


def asymptotic_envelope(surface: Hypersurface, xi) -> float:
    """Magnitude 2 K^{-1/2} |xi|^{-(d-1)/2} / |Sigma| of the leading term."""
    xi = np.asarray(xi, dtype=np.float64)
    k = float(np.linalg.norm(xi))
    d = surface.d
    a = np.array(surface.semi_axes)
    eta = float(np.linalg.norm(a * xi))
    curvature = eta ** (d + 1) / (float(np.prod(a * a)) * k ** (d + 1))
    return 2 * curvature ** -0.5 * k ** (-(d - 1) / 2) / surface.measure


def sigma_hat_values(surface: Hypersurface, xis: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """sigma_hat at many frequencies: closed form when available, else quadrature."""
    xis = np.asarray(xis, dtype=np.float64)
    if _has_closed_form(surface):
        return closed_form_values(surface, xis)
    return np.array([sigma_hat(surface, x, tol).value for x in xis], dtype=complex)


# --------------------------------------------------------------------------
# decay profiling

def sample_directions(d: int, n: int) -> np.ndarray:
    """Deterministic, roughly uniform unit vectors (golden-angle spirals)."""
    golden = math.pi * (3.0 - math.sqrt(5.0))
    i = np.arange(n)
    if d == 2:
        ang = golden * i
        return np.column_stack([np.cos(ang), np.sin(ang)])
    z = 1.0 - (2 * i + 1) / n
    r = np.sqrt(1.0 - z * z)
    ang = golden * i
    return np.column_stack([r * np.cos(ang), r * np.sin(ang), z])


def decay_profile(surface: Hypersurface, R_min: float, R_max: float,
                  samples_per_block: int, tol: float = DEFAULT_TOL) -> list[tuple[float, float]]:
    """Per dyadic block [R, 2R], the sampled maximum of |sigma_hat(xi)| |xi|^{(d-1)/2}."""
    if not (1 <= R_min < R_max):
        raise ValueError("need 1 <= R_min < R_max")
    if samples_per_block < 1:
        raise ValueError("need at least one sample per block")
    d = surface.d
    dirs = sample_directions(d, samples_per_block)
    out = []
    R = float(R_min)
    while 2 * R <= R_max * (1 + 1e-12):
        radii = R * 2.0 ** ((np.arange(samples_per_block) + 0.5) / samples_per_block)
        best = 0.0
        for rad, u in zip(radii, dirs):
            val = abs(sigma_hat(surface, rad * u, tol).value)
            best = max(best, float(val * rad ** ((d - 1) / 2)))
        out.append((R, best))
        R *= 2
    return out


def decay_trend_ratio(profile: list[tuple[float, float]]) -> float:
    """max over the upper half of blocks divided by max over the lower half."""
    vals = [v for _, v in profile]
    half = len(vals) // 2
    if half == 0:
        raise ValueError("need at least two blocks")
    return max(vals[half:]) / max(vals[:half])
