"""Bessel J0 from its power series and its large-argument Hankel expansion."""
from __future__ import annotations

import numpy as np

SWITCH = 12.0
_SERIES_TERMS = 60
_HANKEL_TERMS = 12


def _j0_series(x: np.ndarray) -> np.ndarray:
    # sum_k (-1)^k (x/2)^{2k} / (k!)^2, summed until the terms vanish in double
    q = -(x * x) / 4.0
    term = np.ones_like(x)
    total = np.ones_like(x)
    for k in range(1, _SERIES_TERMS):
        term = term * q / (k * k)
        total = total + term
    return total


def _hankel_coefficients(n_terms: int) -> list[float]:
    """a_k = prod_{j=1..k} (2j-1)^2 / (k! 8^k), the order-0 Hankel coefficients."""
    coef = [1.0]
    for k in range(1, n_terms):
        coef.append(coef[-1] * (2 * k - 1) ** 2 / (8.0 * k))
    return coef


_A = _hankel_coefficients(2 * _HANKEL_TERMS)


def _j0_asymptotic(x: np.ndarray) -> np.ndarray:
    # J0(x) ~ sqrt(2/(pi x)) [P cos(x - pi/4) - Q sin(x - pi/4)]
    p = np.zeros_like(x)
    q = np.zeros_like(x)
    inv = 1.0 / x
    for k in range(2 * _HANKEL_TERMS):
        t = _A[k] * inv**k
        if k % 2 == 0:
            p += t if (k // 2) % 2 == 0 else -t
        else:
            q -= t if (k // 2) % 2 == 0 else -t
    chi = x - np.pi / 4
    return np.sqrt(2.0 / (np.pi * x)) * (p * np.cos(chi) - q * np.sin(chi))


def j0(x) -> np.ndarray:
    """Bessel function of the first kind, order zero (real arguments)."""
    x = np.abs(np.asarray(x, dtype=np.float64))
    out = np.empty_like(x)
    small = x < SWITCH
    out[small] = _j0_series(x[small])
    out[~small] = _j0_asymptotic(x[~small])
    return out if out.ndim else out[()]


def j0_envelope(x) -> np.ndarray:
    """Leading-order amplitude sqrt(2/(pi x)) of J0 at large argument."""
    return np.sqrt(2.0 / (np.pi * np.asarray(x, dtype=np.float64)))
