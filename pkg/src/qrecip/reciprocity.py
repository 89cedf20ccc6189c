"""Reciprocity product sqrt(eta_x * eta_p) and the variance product dx * dp.

eta_x and eta_p are the Lipschitz constants of the position and momentum
densities; with hbar = 1 the product is reported in units of 1/hbar.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import lipschitz as lc
from . import states as st
from .quadrature import integrate
from .specfun import hermite_functions


class InfiniteVarianceError(ValueError):
    """The state has no finite second moment in position or momentum."""


@dataclass(frozen=True)
class ReciprocityResult:
    eta_x: float
    eta_p: float
    product_tilde: float
    divergent: bool
    diagnostics: dict = field(default_factory=dict, compare=False)

    def as_dict(self) -> dict:
        return {"eta_x": self.eta_x, "eta_p": self.eta_p,
                "product_tilde": self.product_tilde, "divergent": self.divergent,
                "diagnostics": self.diagnostics}


def _assemble(est_x: lc.LipschitzEstimate, est_p: lc.LipschitzEstimate,
              diagnostics: dict) -> ReciprocityResult:
    divergent = est_x.divergent or est_p.divergent
    product = math.inf if divergent else math.sqrt(est_x.value * est_p.value)
    diagnostics = dict(diagnostics)
    diagnostics["eta_x_estimate"] = est_x.as_dict()
    diagnostics["eta_p_estimate"] = est_p.as_dict()
    return ReciprocityResult(est_x.value, est_p.value, product, divergent, diagnostics)


def reciprocity_from_densities(f: Callable, df: Optional[Callable], x_domain,
                               g: Callable, dg: Optional[Callable], p_domain,
                               **kwargs) -> ReciprocityResult:
    """Combine the Lipschitz constants of arbitrary position/momentum densities."""
    est_x = lc.lipschitz_constant(f, x_domain, df, **kwargs)
    est_p = lc.lipschitz_constant(g, p_domain, dg, **kwargs)
    return _assemble(est_x, est_p, {"momentum_path": "callable"})


def divergence_sweep(state: st.StateSpec, epsilons: Optional[Sequence[float]] = None,
                     model: Optional[str] = None, **kwargs):
    """LC of the momentum density on |p| >= eps and its divergence fit.

    Returns ``(samples, fit)`` with ``samples = [(eps, lc), ...]`` in
    decreasing-eps order.  The default model is linear in 1/eps for the
    Cauchy-Lorentz state and quadratic in ln(1/eps) otherwise.
    """
    if epsilons is None:
        epsilons = lc.default_epsilons()
    if model is None:
        model = lc.LINEAR if isinstance(state, st.CauchyLorentz) else lc.QUADRATIC
    g = lambda p: st.momentum_density(state, p)
    dg = st.momentum_density_derivative
    dg_state = (lambda p: dg(state, p)) if st.has_analytic_momentum(state) else None
    sweep = lc.epsilon_sweep(g, epsilons, dg_state, st.momentum_support(state), **kwargs)
    samples = [(e, est.value) for e, est in sweep]
    return samples, lc.fit_divergence(samples, model)


def _momentum_estimate(state: st.StateSpec, **kwargs):
    support = st.momentum_support(state)
    g = lambda p: st.momentum_density(state, p)
    if st.has_analytic_momentum(state):
        dg = lambda p: st.momentum_density_derivative(state, p)
        return lc.lipschitz_constant(g, (-support, support), dg, **kwargs), {"momentum_path": "analytic"}
    # tabulated FFT samples bracket the maxima; refinement uses direct quadrature
    phi = st.momentum_samples(state)
    samples = (phi.grid, np.abs(phi.values) ** 2)
    est = lc.lipschitz_constant(g, (-support, support), None, samples=samples, **kwargs)
    plan = st.transform_plan(state)
    return est, {"momentum_path": "transform", "transform_plan": plan.as_dict()}


def reciprocity_product(state: st.StateSpec, **kwargs) -> ReciprocityResult:
    """eta_x, eta_p and sqrt(eta_x eta_p) for a catalog state.

    Extra keyword arguments are passed to
    :func:`qrecip.lipschitz.lipschitz_constant`.
    """
    c = st.center(state)
    lim = st.position_support(state)
    est_x = lc.lipschitz_constant(lambda x: st.position_density(state, x), (c - lim, c + lim),
                                  lambda x: st.position_density_derivative(state, x), **kwargs)
    est_p, diag = _momentum_estimate(state, **kwargs)
    result = _assemble(est_x, est_p, diag)
    if result.divergent:
        samples, fit = divergence_sweep(state, **kwargs)
        result.diagnostics["epsilon_sweep"] = [[e, v] for e, v in samples]
        result.diagnostics["divergence_fit"] = fit.as_dict()
    return result


def _ordered_map(func, items, workers: Optional[int]):
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(v) for v in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items))


def sho_level_scan(n_max: int, alpha: float = 1.0, workers: Optional[int] = None, **kwargs) -> list:
    """[(level, product_tilde)] for oscillator levels 0..n_max.

    Extra keyword arguments go to the Lipschitz estimator.
    """
    if int(n_max) != n_max or not 0 <= n_max <= 64:
        raise ValueError(f"n_max must be an integer in [0, 64], got {n_max!r}")
    products = _ordered_map(lambda n: reciprocity_product(st.SHO(n, alpha), **kwargs).product_tilde,
                            range(int(n_max) + 1), workers)
    return list(zip(range(int(n_max) + 1), products))


def student_dof_scan(dof_list: Sequence[int], workers: Optional[int] = None, **kwargs) -> list:
    """[(dof, product_tilde)] for Student-t states with dof >= 3."""
    dofs = [int(d) for d in dof_list]
    for d in dofs:
        if d < 3:
            raise ValueError(f"dof must be >= 3 for a finite product, got {d}")
    products = _ordered_map(lambda d: reciprocity_product(st.StudentT(d), **kwargs).product_tilde,
                            dofs, workers)
    return list(zip(dofs, products))


# --- variance product ----------------------------------------------------

def _wavefunction_derivative(state: st.StateSpec, x):
    x = np.asarray(x, dtype=float)
    if isinstance(state, st.SHO):
        a, n = state.alpha, state.n
        c = np.zeros(n + 1)
        c[n] = 1.0
        d = st._hermite_derivative_coeffs(c)
        return a ** 0.75 * np.tensordot(d, hermite_functions(n + 1, math.sqrt(a) * x), axes=1)
    if isinstance(state, st.HermiteSuperposition):
        d = st._hermite_derivative_coeffs(state.array)
        return np.tensordot(d, hermite_functions(state.degree + 1, x), axes=1)
    f = st.position_density(state, x)
    return st.position_density_derivative(state, x) / (2.0 * np.sqrt(f))


def uncertainty_product(state: st.StateSpec) -> float:
    """dx * dp in units of hbar, by quadrature over the position representation.

    <p^k> uses psi' (p = -i d/dx), so no momentum transform is needed.
    """
    if isinstance(state, st.CauchyLorentz) or (isinstance(state, st.StudentT) and state.dof <= 2):
        raise InfiniteVarianceError("infinite variance")
    c = st.center(state)
    if isinstance(state, st.StudentT):
        spans = [(-math.inf, -50.0), (-50.0, 0.0), (0.0, 50.0), (50.0, math.inf)]
    else:
        lim = st.position_support(state)
        spans = [(c - lim, c + lim)]

    def moment(func):
        return math.fsum(integrate(func, a, b, rtol=1e-13, atol=1e-15, initial_panels=16)
                         for a, b in spans)

    psi = lambda x: st.position_wavefunction(state, x)
    dpsi = lambda x: _wavefunction_derivative(state, x)
    f = lambda x: st.position_density(state, x)
    mx = moment(lambda x: x * f(x))
    var_x = moment(lambda x: (x - mx) ** 2 * f(x))
    mp = moment(lambda x: np.real(np.conj(psi(x)) * (-1j) * dpsi(x)))
    var_p = moment(lambda x: np.abs(dpsi(x)) ** 2) - mp * mp
    return math.sqrt(var_x * var_p)


# --- batched Hermite superpositions --------------------------------------

def _derivative_matrix(size: int) -> np.ndarray:
    """D with (coefficients of psi') = D @ c, mapping size -> size + 1."""
    d = np.zeros((size + 1, size))
    for k in range(size):
        d[k + 1, k] -= math.sqrt((k + 1) / 2.0)
        if k > 0:
            d[k - 1, k] += math.sqrt(k / 2.0)
    return d


def _batched_sup_slope(coeffs: np.ndarray, n_grid: int, newton_steps: int, top: int) -> np.ndarray:
    """sup |f'| of f = |sum c_k h_k|^2 for each row of ``coeffs``."""
    m, size = coeffs.shape
    half = math.sqrt(2 * size - 1) + 5.0
    x = np.linspace(-half, half, n_grid)
    dx = x[1] - x[0]
    d1 = _derivative_matrix(size)
    d2 = _derivative_matrix(size + 1) @ d1
    d3 = _derivative_matrix(size + 2) @ d2
    # coefficient blocks for psi, psi', psi'', psi''' on a common h_0..h_{size+2} basis
    blocks = []
    for mat in (np.eye(size), d1, d2, d3):
        pad = np.zeros((size + 3, size))
        pad[:mat.shape[0]] = mat
        blocks.append(coeffs @ pad.T)
    h = hermite_functions(size + 2, x)
    psi, dpsi = blocks[0] @ h, blocks[1] @ h
    slope = 2.0 * np.real(np.conj(psi) * dpsi)
    mag = np.abs(slope)
    best = mag.max(axis=1)

    # Newton on f'' = 0 from the largest interior local maxima of |f'|
    interior = (mag[:, 1:-1] >= mag[:, :-2]) & (mag[:, 1:-1] >= mag[:, 2:])
    score = np.where(interior, mag[:, 1:-1], -1.0)
    order = np.argsort(-score, axis=1)[:, :top] + 1
    rows = np.arange(m)[:, None]
    x0 = x[order]
    xt = x0.copy()
    for _ in range(newton_steps):
        h = hermite_functions(size + 2, xt)  # (size+3, m, top)
        v = [np.einsum("mk,kmt->mt", b, h) for b in blocks]
        f2 = 2.0 * np.real(np.conj(v[1]) * v[1] + np.conj(v[0]) * v[2])
        f3 = 2.0 * np.real(3.0 * np.conj(v[1]) * v[2] + np.conj(v[0]) * v[3])
        with np.errstate(divide="ignore", invalid="ignore"):
            step = np.where(f3 != 0, f2 / f3, 0.0)
        xt = np.clip(xt - step, x0 - dx, x0 + dx)
    h = hermite_functions(size + 2, xt)
    v0 = np.einsum("mk,kmt->mt", blocks[0], h)
    v1 = np.einsum("mk,kmt->mt", blocks[1], h)
    refined = np.abs(2.0 * np.real(np.conj(v0) * v1))
    valid = score[rows, order - 1] > 0
    refined = np.where(valid, refined, 0.0)
    return np.maximum(best, refined.max(axis=1))


def hermite_products(coeffs, n_grid: int = 1024, newton_steps: int = 6, top: int = 3,
                     chunk: int = 2048) -> np.ndarray:
    """Reciprocity products for many Hermite superpositions at once.

    ``coeffs`` has shape (M, n + 1) and need not be normalised.  The
    momentum density is the position density of c_k (-i)^k, so both
    Lipschitz constants come from the same evaluator.
    """
    c = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    c = c / np.linalg.norm(c, axis=1, keepdims=True)
    rot = c * (-1j) ** np.arange(c.shape[1])
    out = np.empty(c.shape[0])
    for start in range(0, c.shape[0], chunk):
        sl = slice(start, start + chunk)
        both = np.concatenate([c[sl], rot[sl]])
        sup = _batched_sup_slope(both, n_grid, newton_steps, top)
        k = sup.size // 2
        out[sl] = np.sqrt(sup[:k] * sup[k:])
    return out
