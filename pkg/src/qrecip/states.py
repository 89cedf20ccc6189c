"""Catalog of one-dimensional pure states and their position/momentum densities.

Units: hbar = 1 and lengths are dimensionless.  Every state is an immutable
dataclass; all density functions accept scalars or numpy arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Union

import numpy as np

from . import fourier
from .quadrature import integrate
from .specfun import bessel_k_array, hermite_functions, log_gamma

DIVERGENT = math.inf
"""Sentinel returned by momentum densities at a singular point (p = 0)."""


@dataclass(frozen=True)
class SHO:
    """Energy eigenstate ``n`` of the harmonic oscillator, alpha = m omega / hbar."""

    n: int
    alpha: float = 1.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"SHO level must be a non-negative integer, got {self.n!r}")
        if self.n > 64:
            raise ValueError("SHO level must be <= 64")
        if not self.alpha > 0:
            raise ValueError(f"alpha must be positive, got {self.alpha!r}")


@dataclass(frozen=True)
class CauchyLorentz:
    x0: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")


@dataclass(frozen=True)
class StudentT:
    dof: int

    def __post_init__(self):
        if int(self.dof) != self.dof or self.dof < 2:
            raise ValueError(f"Student-t dof must be an integer >= 2, got {self.dof!r}")


@dataclass(frozen=True)
class HermiteSuperposition:
    """psi = sum_k c_k h_k with alpha = 1; ``coeffs`` must have unit norm."""

    coeffs: tuple

    def __post_init__(self):
        c = tuple(complex(v) for v in self.coeffs)
        if not 1 <= len(c) <= 65:
            raise ValueError("need between 1 and 65 coefficients (degree <= 64)")
        norm = math.fsum(abs(v) ** 2 for v in c)
        if abs(norm - 1.0) > 1e-12:
            raise ValueError(f"coefficients must have unit norm, got sum|c|^2 = {norm!r}")
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def normalized(cls, coeffs) -> "HermiteSuperposition":
        c = np.asarray(coeffs, dtype=complex)
        return cls(tuple(c / np.linalg.norm(c)))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    @property
    def array(self) -> np.ndarray:
        return np.array(self.coeffs, dtype=complex)


StateSpec = Union[SHO, CauchyLorentz, StudentT, HermiteSuperposition]


def _student_norm(dof: int) -> float:
    return math.exp(log_gamma((dof + 1) / 2) - log_gamma(dof / 2)) / math.sqrt(dof * math.pi)


def _hermite_derivative_coeffs(c: np.ndarray) -> np.ndarray:
    """Coefficients of psi' in the h_k basis (one order longer than ``c``)."""
    d = np.zeros(c.size + 1, dtype=complex)
    k = np.arange(c.size)
    d[1:] -= np.sqrt((k + 1) / 2.0) * c
    d[:-2] += np.sqrt(k[1:] / 2.0) * c[1:]
    return d


def _hermite_series(c: np.ndarray, z):
    h = hermite_functions(c.size - 1, z)
    return np.tensordot(c, h, axes=1)


# --- position representation ---------------------------------------------

def position_wavefunction(state: StateSpec, x):
    x = np.asarray(x, dtype=float)
    if isinstance(state, SHO):
        a = state.alpha
        return a ** 0.25 * hermite_functions(state.n, math.sqrt(a) * x)[-1]
    if isinstance(state, HermiteSuperposition):
        return _hermite_series(state.array, x)
    return np.sqrt(position_density(state, x))


def position_density(state: StateSpec, x):
    """f(x) = |psi(x)|^2."""
    x = np.asarray(x, dtype=float)
    if isinstance(state, CauchyLorentz):
        g = state.gamma
        return (g / math.pi) / ((x - state.x0) ** 2 + g * g)
    if isinstance(state, StudentT):
        n = state.dof
        return _student_norm(n) * (1.0 + x * x / n) ** (-(n + 1) / 2.0)
    return np.abs(position_wavefunction(state, x)) ** 2


def position_density_derivative(state: StateSpec, x, analytic: bool = True):
    """f'(x), analytic unless ``analytic=False`` (central finite differences)."""
    x = np.asarray(x, dtype=float)
    if not analytic:
        h = np.maximum(1e-6, 1e-8 * np.abs(x))
        return (position_density(state, x + h) - position_density(state, x - h)) / (2 * h)
    if isinstance(state, CauchyLorentz):
        g = state.gamma
        u = x - state.x0
        return -2.0 * g * u / (math.pi * (u * u + g * g) ** 2)
    if isinstance(state, StudentT):
        n = state.dof
        return (-_student_norm(n) * (n + 1) / n * x
                * (1.0 + x * x / n) ** (-(n + 3) / 2.0))
    if isinstance(state, SHO):
        a, n = state.alpha, state.n
        z = math.sqrt(a) * x
        h = hermite_functions(n + 1, z)
        dh = -math.sqrt((n + 1) / 2.0) * h[n + 1]
        if n > 0:
            dh = dh + math.sqrt(n / 2.0) * h[n - 1]
        return 2.0 * a * h[n] * dh
    c = state.array
    psi = _hermite_series(c, x)
    dpsi = _hermite_series(_hermite_derivative_coeffs(c), x)
    return 2.0 * np.real(np.conj(psi) * dpsi)


def position_tail(state: StateSpec, terms: int = 4):
    """Power-law expansion psi(x) ~ sum b_m |x|^(-a_m) for large |x|.

    Returns a list of ``(b_m, a_m)`` for heavy-tailed states, ``None`` for
    states with Gaussian decay.
    """
    if isinstance(state, CauchyLorentz):
        g = state.gamma
        a = 1.0
        lead = math.sqrt(g / math.pi)
        scale = g * g
    elif isinstance(state, StudentT):
        n = state.dof
        a = (n + 1) / 2.0
        lead = math.sqrt(_student_norm(n)) * n ** (a / 2.0)
        scale = float(n)
    else:
        return None
    # (x^2 + s)^(-a/2) = x^-a sum_m binom(-a/2, m) s^m x^-2m
    out = []
    binom = 1.0
    for m in range(terms):
        out.append((lead * binom * scale ** m, a + 2 * m))
        binom *= (-a / 2.0 - m) / (m + 1)
    return out


# --- momentum representation ---------------------------------------------

def has_analytic_momentum(state: StateSpec) -> bool:
    return not (isinstance(state, StudentT) and state.dof > 2)


def momentum_wavefunction(state: StateSpec, p):
    """phi(p) with the convention phi = (2 pi)^-1/2 int psi(x) exp(-i x p) dx."""
    p = np.asarray(p, dtype=float)
    if isinstance(state, SHO):
        a = state.alpha
        return (-1j) ** state.n * a ** -0.25 * hermite_functions(state.n, p / math.sqrt(a))[-1]
    if isinstance(state, HermiteSuperposition):
        c = state.array * (-1j) ** np.arange(state.degree + 1)
        return _hermite_series(c, p)
    if isinstance(state, CauchyLorentz):
        # the location x0 only contributes the phase exp(-i p x0)
        g = state.gamma
        out = _singular_eval(p, lambda q: math.sqrt(2.0 * g) / math.pi * bessel_k_array(0.0, g * q))
        return out * np.exp(-1j * p * state.x0)
    if state.dof == 2:
        return _singular_eval(p, _student2_phi)
    return _student_phi_numeric(state, p)


def _singular_eval(p, fn):
    q = np.abs(p)
    out = np.full(q.shape, DIVERGENT)
    mask = q > 0
    if np.any(mask):
        out[mask] = fn(q[mask])
    return out if out.ndim else float(out)


_GAMMA_3_4 = math.exp(log_gamma(0.75))


def _student2_phi(q):
    z = math.sqrt(2.0) * q
    return z ** 0.25 * bessel_k_array(0.25, z) / _GAMMA_3_4


def _student2_dphi(q):
    z = math.sqrt(2.0) * q
    # d/dz [z^nu K_nu(z)] = -z^nu K_{nu-1}(z)
    return -math.sqrt(2.0) * z ** 0.25 * bessel_k_array(-0.75, z) / _GAMMA_3_4


def momentum_density(state: StateSpec, p):
    """g(p) = |phi(p)|^2; returns :data:`DIVERGENT` at p = 0 for the cusped states."""
    p = np.asarray(p, dtype=float)
    if isinstance(state, CauchyLorentz):
        g = state.gamma
        return _singular_eval(p, lambda q: 2.0 * g / math.pi ** 2 * bessel_k_array(0.0, g * q) ** 2)
    if isinstance(state, StudentT) and state.dof == 2:
        return _singular_eval(p, lambda q: _student2_phi(q) ** 2)
    out = np.abs(momentum_wavefunction(state, p)) ** 2
    return out if out.ndim else float(out)


def momentum_density_derivative(state: StateSpec, p):
    """g'(p) in closed form; ``None`` when only the numeric transform exists."""
    p = np.asarray(p, dtype=float)
    if isinstance(state, SHO):
        # g(p) equals the position density of level n with alpha -> 1/alpha
        return position_density_derivative(SHO(state.n, 1.0 / state.alpha), p)
    if isinstance(state, HermiteSuperposition):
        rotated = state.array * (-1j) ** np.arange(state.degree + 1)
        return position_density_derivative(HermiteSuperposition(tuple(rotated)), p)
    if isinstance(state, CauchyLorentz):
        g = state.gamma
        s = np.sign(p)
        mag = _singular_eval(
            p, lambda q: 4.0 * g * g / math.pi ** 2
            * bessel_k_array(0.0, g * q) * bessel_k_array(1.0, g * q))
        return -s * mag
    if state.dof == 2:
        s = np.sign(p)
        return s * _singular_eval(p, lambda q: 2.0 * _student2_phi(q) * _student2_dphi(q))
    return None


# --- numeric momentum for Student-t with dof > 2 ---------------------------

def transform_plan(state: StateSpec) -> fourier.TransformPlan:
    """Default FFT window for ``state`` with the tail mass it leaves out."""
    if isinstance(state, (CauchyLorentz, StudentT)):
        x_lim, n_points = 2000.0, 2 ** 18
    else:
        x_lim, n_points = 40.0, 2 ** 14
    center = state.x0 if isinstance(state, CauchyLorentz) else 0.0
    return fourier.TransformPlan(center - x_lim, center + x_lim, n_points,
                                 window_tail_mass=tail_mass(state, x_lim))


def tail_mass(state: StateSpec, half_width: float) -> float:
    """Probability outside the window centred on the state of given half-width."""
    if isinstance(state, CauchyLorentz):
        return 1.0 - 2.0 / math.pi * math.atan(half_width / state.gamma)
    if isinstance(state, StudentT):
        return 2.0 * integrate(lambda x: position_density(state, x), half_width, math.inf,
                               rtol=1e-12, atol=0.0)
    lim = position_support(state)
    if half_width >= lim:
        return 0.0
    return 2.0 * integrate(lambda x: position_density(state, x), half_width, lim,
                           rtol=1e-12, atol=0.0)


def _student_cutoff(dof: int) -> float:
    # |x| beyond which psi is below 1e-17 of psi(0), capped at the FFT window
    ratio = 10 ** (68.0 / (dof + 1))
    return min(2000.0, math.sqrt(dof * (ratio - 1.0)))


def _student_phi_numeric(state: StudentT, p):
    psi = lambda x: position_wavefunction(state, x)
    x_max = _student_cutoff(state.dof)
    tail = position_tail(state) if x_max >= 2000.0 else None
    q = np.atleast_1d(p)
    vals = np.array([fourier.momentum_at(psi, float(v), x_max, even=True, tail=tail).real
                     for v in q.ravel()]).reshape(q.shape)
    return vals if np.ndim(p) else float(vals[0])


@lru_cache(maxsize=16)
def momentum_samples(state: StateSpec) -> fourier.SampledFunction:
    """phi on the conjugate FFT grid of :func:`transform_plan` (fast path)."""
    plan = transform_plan(state)
    return fourier.transform_callable(lambda x: position_wavefunction(state, x), plan,
                                      tail=position_tail(state))


# --- supports and normalisation ------------------------------------------

def position_support(state: StateSpec) -> float:
    """Half-width of the window (around the centre) holding the density's structure."""
    if isinstance(state, SHO):
        return (math.sqrt(2 * state.n + 1) + 10.0) / math.sqrt(state.alpha)
    if isinstance(state, HermiteSuperposition):
        return math.sqrt(2 * state.degree + 1) + 10.0
    if isinstance(state, CauchyLorentz):
        return 200.0 * state.gamma
    return min(2000.0, 20.0 * math.sqrt(state.dof) + 200.0 / (state.dof - 1))


def momentum_support(state: StateSpec) -> float:
    if isinstance(state, SHO):
        return (math.sqrt(2 * state.n + 1) + 10.0) * math.sqrt(state.alpha)
    if isinstance(state, HermiteSuperposition):
        return math.sqrt(2 * state.degree + 1) + 10.0
    if isinstance(state, CauchyLorentz):
        return 40.0 / state.gamma
    if state.dof == 2:
        return 30.0
    return 12.0


def center(state: StateSpec) -> float:
    return state.x0 if isinstance(state, CauchyLorentz) else 0.0


def normalization_residual(state: StateSpec) -> float:
    """|1 - int f(x) dx| by adaptive quadrature (analytic tail for Cauchy)."""
    f = lambda x: position_density(state, x)
    c = center(state)
    if isinstance(state, CauchyLorentz):
        width = 1000.0 * state.gamma
        body = integrate(f, c - width, c + width, rtol=1e-13, atol=0.0,
                         breakpoints=[c - state.gamma, c, c + state.gamma])
        tail = 1.0 - 2.0 / math.pi * math.atan(width / state.gamma)
        return abs(1.0 - body - tail)
    if isinstance(state, StudentT):
        total = 2.0 * (integrate(f, 0.0, 50.0, rtol=1e-13, atol=0.0)
                       + integrate(f, 50.0, math.inf, rtol=1e-13, atol=0.0))
        return abs(1.0 - total)
    lim = position_support(state)
    total = integrate(f, -lim, lim, rtol=1e-13, atol=0.0, initial_panels=64)
    return abs(1.0 - total)
