"""Continuous Fourier transform of sampled wavefunctions.

Convention (hbar = 1 by default)::

    phi(p) = (2 pi hbar)^(-1/2) int psi(x) exp(-i x p / hbar) dx

The FFT path returns phi on the conjugate grid; :func:`momentum_at` evaluates
the integral directly at arbitrary p for derivative-sensitive callers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .quadrature import integrate

MIN_POINTS = 2 ** 10
CONVERGENCE_TOL = 1e-6


class TransformConvergenceError(RuntimeError):
    """Doubling the grid changed the transformed norm by more than the tolerance."""


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(frozen=True)
class SampledFunction:
    """Complex samples on a uniform grid that includes both endpoints."""

    x_min: float
    x_max: float
    n_points: int
    values: np.ndarray = field(repr=False)
    axis_kind: str = "position"

    def __post_init__(self):
        if not _is_power_of_two(self.n_points) or self.n_points < MIN_POINTS:
            raise ValueError(f"n_points must be a power of two >= {MIN_POINTS}")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if self.axis_kind not in ("position", "momentum"):
            raise ValueError(f"unknown axis kind {self.axis_kind!r}")
        vals = np.asarray(self.values, dtype=complex)
        if vals.shape != (self.n_points,):
            raise ValueError("values must have n_points entries")
        if not np.all(np.isfinite(vals)):
            raise ValueError("sampled values must be finite")
        object.__setattr__(self, "values", vals)

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.n_points - 1)

    @property
    def grid(self) -> np.ndarray:
        return self.x_min + self.spacing * np.arange(self.n_points)

    def norm(self) -> float:
        """Riemann-sum estimate of int |values|^2."""
        return float(self.spacing * np.sum(np.abs(self.values) ** 2))

    @classmethod
    def from_callable(cls, func, x_min, x_max, n_points, axis_kind="position"):
        x = x_min + (x_max - x_min) / (n_points - 1) * np.arange(n_points)
        return cls(x_min, x_max, n_points, func(x), axis_kind)


@dataclass(frozen=True)
class TransformPlan:
    x_min: float
    x_max: float
    n_points: int
    hbar: float = 1.0
    window_tail_mass: float = 0.0

    def __post_init__(self):
        if not _is_power_of_two(self.n_points) or self.n_points < MIN_POINTS:
            raise ValueError(f"n_points must be a power of two >= {MIN_POINTS}")
        if not self.hbar > 0:
            raise ValueError("hbar must be positive")

    def doubled(self) -> "TransformPlan":
        return TransformPlan(self.x_min, self.x_max, 2 * self.n_points, self.hbar,
                             self.window_tail_mass)

    def as_dict(self) -> dict:
        return {"x_min": self.x_min, "x_max": self.x_max, "n_points": self.n_points,
                "hbar": self.hbar, "window_tail_mass": self.window_tail_mass}


def conjugate_grid(n_points: int, spacing: float, hbar: float = 1.0) -> np.ndarray:
    dp = 2.0 * math.pi * hbar / (n_points * spacing)
    return (np.arange(n_points) - n_points // 2) * dp


def to_momentum(psi: SampledFunction, hbar: float = 1.0,
                tail: Optional[Sequence[tuple]] = None) -> SampledFunction:
    """Discrete approximation of the continuous transform on the conjugate grid.

    With x_j = x_min + j dx and p_k = (k - N/2) dp, dp = 2 pi hbar / (N dx)::

        phi_k = dx / sqrt(2 pi hbar) exp(-i p_k x_min / hbar) FFT[(-1)^j psi_j]_k

    ``tail`` optionally adds the contribution of an even power-law tail
    beyond a symmetric window (see :func:`tail_integral`).
    """
    n = psi.n_points
    dx = psi.spacing
    p = conjugate_grid(n, dx, hbar)
    sign = np.where(np.arange(n) % 2, -1.0, 1.0)
    phi = np.fft.fft(psi.values * sign)
    phi *= np.exp(-1j * p * psi.x_min / hbar)
    # trapezoid end weights: the grid carries both endpoints, which matters
    # whenever psi has not decayed to zero at the window edge
    e_lo, e_hi = np.exp(-1j * p * psi.x_min / hbar), np.exp(-1j * p * psi.x_max / hbar)
    v = psi.values
    phi -= 0.5 * (v[0] * e_lo + v[-1] * e_hi)
    # next Euler-Maclaurin term, -dx^2/12 [F'(x_max) - F'(x_min)] with
    # F = psi exp(-i p x / hbar); psi' from one-sided second-order differences
    d_lo = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dx)
    d_hi = (3.0 * v[-1] - 4.0 * v[-2] + v[-3]) / (2.0 * dx)
    q = p / hbar
    phi -= dx / 12.0 * ((d_hi - 1j * q * v[-1]) * e_hi - (d_lo - 1j * q * v[0]) * e_lo)
    phi *= dx / math.sqrt(2.0 * math.pi * hbar)
    if tail is not None:
        half = 0.5 * (psi.x_max - psi.x_min)
        center = 0.5 * (psi.x_max + psi.x_min)
        q = p / hbar
        corr = 2.0 * tail_integral(tail, half, q)
        mask = np.isfinite(corr)
        phi[mask] += corr[mask] * np.exp(-1j * q[mask] * center) / math.sqrt(2.0 * math.pi * hbar)
    kind = "momentum" if psi.axis_kind == "position" else "position"
    return SampledFunction(float(p[0]), float(p[-1]), n, phi, kind)


def transform_callable(func: Callable, plan: TransformPlan,
                       tail: Optional[Sequence[tuple]] = None,
                       check_convergence: bool = True) -> SampledFunction:
    """Sample ``func`` on ``plan`` and transform it, verifying grid convergence."""
    psi = SampledFunction.from_callable(func, plan.x_min, plan.x_max, plan.n_points)
    phi = to_momentum(psi, plan.hbar, tail)
    if check_convergence:
        finer = SampledFunction.from_callable(func, plan.x_min, plan.x_max, 2 * plan.n_points)
        change = abs(to_momentum(finer, plan.hbar).norm() - to_momentum(psi, plan.hbar).norm())
        if change > CONVERGENCE_TOL:
            raise TransformConvergenceError(
                f"norm changed by {change:.3e} when doubling to {2 * plan.n_points} points")
    return phi


def plancherel_residual(psi: SampledFunction, phi: SampledFunction,
                        reference_norm: Optional[float] = None) -> float:
    """|int |psi|^2 dx - int |phi|^2 dp|.

    By default both integrals are grid sums.  Pass ``reference_norm`` (the
    exact continuum norm of psi, e.g. 1) to expose mass lost to the window.
    """
    lhs = psi.norm() if reference_norm is None else reference_norm
    return abs(lhs - phi.norm())


# --- direct quadrature (slow path) -----------------------------------------

ASYMPTOTIC_PHASE = 200.0


def _tail_asymptotic(tail, x, p, depth):
    s, c = np.sin(p * x), np.cos(p * x)

    def cos_part(a, k):
        if k > depth:
            return 0.0
        return -x ** -a * s / p + a / p * sin_part(a + 1, k + 1)

    def sin_part(a, k):
        if k > depth:
            return 0.0
        return x ** -a * c / p - a / p * cos_part(a + 1, k + 1)

    return sum(b * cos_part(a, 0) for b, a in tail)


def tail_integral(tail: Sequence[tuple], x0: float, p, depth: int = 10):
    """int_{x0}^inf sum_m b_m x^(-a_m) cos(p x) dx, vectorised over ``p``.

    Beyond the point where p x >= 200 each term is expanded by repeated
    integration by parts::

        C(a) = -x^-a sin(p x) / p + (a / p) S(a + 1)
        S(a) =  x^-a cos(p x) / p - (a / p) C(a + 1)

    and any stretch before it is integrated numerically.  At p = 0 the
    integral is elementary; it diverges (inf) for exponents <= 1.
    """
    q = np.abs(np.asarray(p, dtype=float))
    out = np.empty(q.shape)
    zero = q == 0.0
    if np.any(zero):
        if min(a for _, a in tail) <= 1.0:
            out[zero] = math.inf
        else:
            out[zero] = math.fsum(b * x0 ** (1.0 - a) / (a - 1.0) for b, a in tail)
    pos = ~zero
    if np.any(pos):
        qp = q[pos]
        x_switch = np.maximum(x0, ASYMPTOTIC_PHASE / qp)
        vals = _tail_asymptotic(tail, x_switch, qp, depth)
        for i in np.flatnonzero(x_switch > x0):
            k, xs = qp[i], x_switch[i]
            model = lambda x, k=k: sum(b * x ** -a for b, a in tail) * np.cos(k * x)
            vals[i] += integrate(model, x0, xs, rtol=1e-13, atol=1e-18,
                                 breakpoints=_oscillation_breakpoints(x0, xs, k))
        out[pos] = vals
    return out if out.ndim else float(out)


def _oscillation_breakpoints(x_lo: float, x_hi: float, p: float) -> np.ndarray:
    # geometric spacing for slow decay, refined to ~ a half period of cos(p x)
    edges = [x_lo]
    step = max(0.5, 0.25 * x_lo)
    while edges[-1] < x_hi:
        edges.append(min(x_hi, edges[-1] + step))
        step *= 1.25
    edges = np.array(edges)
    if p > 0:
        half_period = math.pi / p
        extra = np.arange(x_lo, x_hi, half_period)
        edges = np.union1d(edges, extra)
    return edges


def momentum_at(psi: Callable, p: float, x_max: float, even: bool = False,
                tail: Optional[Sequence[tuple]] = None, hbar: float = 1.0,
                rtol: float = 1e-13) -> complex:
    """phi(p) by adaptive quadrature of psi over [-x_max, x_max].

    For ``even`` real psi only the cosine transform on [0, x_max] is formed.
    A power-law ``tail`` beyond x_max is added through :func:`tail_integral`.
    """
    q = p / hbar
    norm = 1.0 / math.sqrt(2.0 * math.pi * hbar)
    edges = _oscillation_breakpoints(0.0, x_max, abs(q))
    if even:
        val = 2.0 * integrate(lambda x: np.real(psi(x)) * np.cos(q * x), 0.0, x_max,
                              rtol=rtol, atol=1e-16, breakpoints=edges)
        if tail is not None:
            val += 2.0 * tail_integral(tail, x_max, q)
        return complex(norm * val)
    all_edges = np.union1d(-edges, edges)
    re = integrate(lambda x: np.real(psi(x) * np.exp(-1j * q * x)), -x_max, x_max,
                   rtol=rtol, atol=1e-16, breakpoints=all_edges)
    im = integrate(lambda x: np.imag(psi(x) * np.exp(-1j * q * x)), -x_max, x_max,
                   rtol=rtol, atol=1e-16, breakpoints=all_edges)
    val = complex(re, im)
    if tail is not None:
        val += 2.0 * tail_integral(tail, x_max, q)
    return norm * val
