"""Special functions used by the state catalog.

Only elementary functions from :mod:`math` / :mod:`numpy` are used so that the
frozen numbers in the test-suite do not depend on a platform special-function
library.
"""

from __future__ import annotations

import math

import numpy as np

from .quadrature import integrate

__all__ = [
    "hermite_poly",
    "hermite_function",
    "hermite_functions",
    "hermite_function_derivative",
    "bessel_k",
    "bessel_k_array",
    "log_gamma",
]

HERMITE_MAX_ORDER = 64
_PI_QUARTER = math.pi ** -0.25


def _check_order(n):
    if int(n) != n or n < 0:
        raise ValueError(f"Hermite order must be a non-negative integer, got {n!r}")
    return int(n)


def hermite_poly(n, z):
    """Physicists' Hermite polynomial H_n(z) by three-term recurrence.

    Integer ``z`` stays in exact integer arithmetic.
    """
    n = _check_order(n)
    if isinstance(z, np.ndarray):
        z = z.astype(float)
    h_prev, h = 1, 2 * z
    if n == 0:
        return h_prev if not isinstance(z, np.ndarray) else np.ones_like(z)
    for k in range(1, n):
        h_prev, h = h, 2 * z * h - 2 * k * h_prev
    return h


def hermite_functions(n_max: int, z) -> np.ndarray:
    """Orthonormal Hermite functions h_0..h_{n_max} evaluated at ``z``.

    Returns an array of shape ``(n_max + 1,) + np.shape(z)``.  The normalised
    recurrence never forms 2^n n!, so it stays finite for large orders.
    """
    n_max = _check_order(n_max)
    z = np.asarray(z, dtype=float)
    out = np.empty((n_max + 1,) + z.shape)
    out[0] = _PI_QUARTER * np.exp(-0.5 * z * z)
    if n_max >= 1:
        out[1] = math.sqrt(2.0) * z * out[0]
    for k in range(1, n_max):
        out[k + 1] = (math.sqrt(2.0 / (k + 1)) * z * out[k]
                      - math.sqrt(k / (k + 1)) * out[k - 1])
    return out


def hermite_function(n: int, z):
    """h_n(z) = pi^{-1/4} (2^n n!)^{-1/2} H_n(z) exp(-z^2/2)."""
    h = hermite_functions(n, z)[-1]
    return float(h) if h.ndim == 0 else h


def hermite_function_derivative(n: int, z):
    """d/dz h_n(z) = sqrt(n/2) h_{n-1}(z) - sqrt((n+1)/2) h_{n+1}(z)."""
    n = _check_order(n)
    h = hermite_functions(n + 1, z)
    d = -math.sqrt((n + 1) / 2.0) * h[n + 1]
    if n > 0:
        d = d + math.sqrt(n / 2.0) * h[n - 1]
    return float(d) if np.ndim(d) == 0 else d


# --- modified Bessel function of the second kind -------------------------

_BESSEL_LOG_CUTOFF = 18 * math.log(10.0)  # integrand below 1e-18 of its peak


def _bessel_tmax(nu: float, z: float) -> float:
    # smallest t with z (cosh t - 1) - |nu| t >= cutoff, by fixed point
    t = math.acosh(1.0 + _BESSEL_LOG_CUTOFF / z)
    for _ in range(4):
        t = math.acosh(1.0 + (_BESSEL_LOG_CUTOFF + abs(nu) * t) / z)
    return t


def _check_bessel_args(nu, z):
    if not z > 0:
        raise ValueError(f"bessel_k requires z > 0, got {z!r}")
    if abs(nu) > 2:
        raise ValueError(f"bessel_k supports |nu| <= 2, got {nu!r}")


def bessel_k(nu: float, z: float) -> float:
    """K_nu(z) = int_0^inf exp(-z cosh t) cosh(nu t) dt for real ``z > 0``.

    The integral is truncated where the integrand falls below 1e-18 of its
    value at t = 0 and evaluated by adaptive Gauss-Kronrod bisection.
    """
    nu = float(nu)
    z = float(z)
    _check_bessel_args(nu, z)
    t_max = _bessel_tmax(nu, z)

    def integrand(t):
        return np.exp(-z * (np.cosh(t) - 1.0)) * np.cosh(nu * t)

    scaled = integrate(integrand, 0.0, t_max, rtol=1e-14, atol=0.0,
                       initial_panels=max(4, int(t_max)))
    return scaled * math.exp(-z)


def bessel_k_array(nu: float, z, step: float = 0.05, chunk: int = 2048) -> np.ndarray:
    """Vectorised K_nu over an array of positive arguments.

    The integrand is analytic in a strip around the real t-axis and decays
    double-exponentially, so the trapezoidal rule converges geometrically in
    ``1/step``; ``step=0.05`` is far inside the 1e-12 regime for |nu| <= 2.
    """
    z = np.asarray(z, dtype=float)
    flat = z.ravel()
    if np.any(~(flat > 0)):
        raise ValueError("bessel_k_array requires all z > 0")
    if abs(nu) > 2:
        raise ValueError(f"bessel_k supports |nu| <= 2, got {nu!r}")
    out = np.empty_like(flat)
    order = np.argsort(flat)
    for start in range(0, flat.size, chunk):
        idx = order[start:start + chunk]
        zc = flat[idx]
        t_max = _bessel_tmax(nu, float(zc[0]))
        t = np.arange(0.0, t_max + step, step)
        w = np.full(t.size, step)
        w[0] = 0.5 * step
        e = np.exp(-np.outer(zc, np.cosh(t) - 1.0)) * np.cosh(nu * t)
        out[idx] = (e @ w) * np.exp(-zc)
    return out.reshape(z.shape)


# --- log-gamma -----------------------------------------------------------

_LANCZOS_G = 7.0
_LANCZOS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)
_HALF_LOG_2PI = 0.5 * math.log(2.0 * math.pi)


def log_gamma(x: float) -> float:
    """ln Gamma(x) for real x > 0 (Lanczos, g = 7, nine terms)."""
    x = float(x)
    if not x > 0:
        raise ValueError(f"log_gamma requires x > 0, got {x!r}")
    shift = 0.0
    while x < 1.5:
        # Gamma(x) = Gamma(x + 1) / x keeps the series in its accurate range
        shift -= math.log(x)
        x += 1.0
    x -= 1.0
    a = _LANCZOS[0]
    for i in range(1, 9):
        a += _LANCZOS[i] / (x + i)
    t = x + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (x + 0.5) * math.log(t) - t + math.log(a) + shift
