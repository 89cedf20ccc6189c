"""Random search over Hermite-function superpositions.

Coefficient vectors c_0..c_n are drawn uniformly from the unit sphere of
R^(n+1) or C^(n+1).  The minimum of the reciprocity product (or of dx dp)
over the draws is tracked, optionally doubling the sample count until the
running minimum settles.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .reciprocity import hermite_products
from .states import HermiteSuperposition

CONVERGENCE_THRESHOLD = 0.005
MAX_DOUBLINGS = 8
POLISH_BUDGET = 200
_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SearchConfig:
    degree: int
    num_samples: int = 3200
    seed: int = 0
    field: str = "complex"
    doubling: bool = False

    def __post_init__(self):
        if int(self.degree) != self.degree or not 2 <= self.degree <= 8:
            raise ValueError(f"degree must be an integer in [2, 8], got {self.degree!r}")
        if int(self.num_samples) != self.num_samples or self.num_samples < 100:
            raise ValueError(f"num_samples must be an integer >= 100, got {self.num_samples!r}")
        if int(self.seed) != self.seed or not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if self.field not in ("real", "complex"):
            raise ValueError(f"field must be 'real' or 'complex', got {self.field!r}")


@dataclass
class SearchResult:
    min_product: float
    argmin_coeffs: np.ndarray
    samples_used: int
    converged: bool
    history: list = field(default_factory=list)
    objective: str = "reciprocity"
    polished_product: Optional[float] = None
    polished_coeffs: Optional[np.ndarray] = None

    def to_dict(self, config: Optional[SearchConfig] = None) -> dict:
        def pairs(c):
            return None if c is None else [[float(v.real), float(v.imag)] for v in np.asarray(c)]
        out = {}
        if config is not None:
            out.update(degree=config.degree, field=config.field, seed=config.seed)
        out.update(
            N=self.samples_used,
            objective=self.objective,
            min_product=self.min_product,
            argmin_coeffs=pairs(self.argmin_coeffs),
            converged=self.converged,
            history=[[int(n), float(v)] for n, v in self.history],
        )
        if self.polished_product is not None:
            out["polished_product"] = self.polished_product
            out["polished_coeffs"] = pairs(self.polished_coeffs)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SearchResult":
        def unpair(v):
            return None if v is None else np.array([complex(a, b) for a, b in v])
        return cls(
            min_product=float(data["min_product"]),
            argmin_coeffs=unpair(data["argmin_coeffs"]),
            samples_used=int(data["N"]),
            converged=bool(data["converged"]),
            history=[(int(n), float(v)) for n, v in data["history"]],
            objective=data.get("objective", "reciprocity"),
            polished_product=data.get("polished_product"),
            polished_coeffs=unpair(data.get("polished_coeffs")),
        )

    def to_json(self, config: Optional[SearchConfig] = None) -> str:
        return json.dumps(self.to_dict(config), indent=2, sort_keys=True)


# --- sampling ------------------------------------------------------------

def _raw_coefficients(config: SearchConfig, index: int) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([int(config.seed), int(index)]))
    size = config.degree + 1
    if config.field == "real":
        v = rng.standard_normal(size).astype(complex)
    else:
        v = rng.standard_normal(size) + 1j * rng.standard_normal(size)
    return v / np.linalg.norm(v)


def sample_state(config: SearchConfig, index: int) -> HermiteSuperposition:
    """Draw number ``index`` of the search; depends only on (seed, index)."""
    if not 0 <= index < config.num_samples:
        raise IndexError(f"index {index} outside [0, {config.num_samples})")
    return HermiteSuperposition(tuple(_raw_coefficients(config, index)))


def sample_block(config: SearchConfig, start: int, stop: int) -> np.ndarray:
    """Coefficient rows for indices start..stop-1 (no range check against N)."""
    return np.array([_raw_coefficients(config, i) for i in range(start, stop)])


# --- objectives ------------------------------------------------------------

def _moment_matrices(size: int):
    """<x>, <p>, <x^2>, <p^2> as Hermitian forms on the span of h_0..h_{size-1}.

    From x h_k = sqrt(k/2) h_{k-1} + sqrt((k+1)/2) h_{k+1} and
    p h_k = -i sqrt(k/2) h_{k-1} + i sqrt((k+1)/2) h_{k+1}.  The squared
    operators leave the span, but their quadratic forms restricted to it are
    exact because the bra lies in the span too.
    """
    k = np.arange(size)
    up1 = np.sqrt((k[:-1] + 1) / 2.0)
    x = np.diag(up1, -1) + np.diag(up1, 1)
    p = 1j * np.diag(up1, -1) - 1j * np.diag(up1, 1)
    up2 = np.sqrt((k[:-2] + 1) * (k[:-2] + 2)) / 2.0
    diag = (2 * k + 1) / 2.0
    x2 = np.diag(diag) + np.diag(up2, 2) + np.diag(up2, -2)
    p2 = np.diag(diag) - np.diag(up2, 2) - np.diag(up2, -2)
    return x.astype(complex), p, x2, p2


def uncertainty_products(coeffs) -> np.ndarray:
    """dx dp / hbar for each row of ``coeffs`` from closed-form moments."""
    c = np.atleast_2d(np.asarray(coeffs, dtype=complex))
    c = c / np.linalg.norm(c, axis=1, keepdims=True)
    x, p, x2, p2 = _moment_matrices(c.shape[1])

    def form(m):
        return np.real(np.einsum("ij,jk,ik->i", np.conj(c), m, c))

    var_x = np.maximum(form(x2) - form(x) ** 2, 0.0)
    var_p = np.maximum(form(p2) - form(p) ** 2, 0.0)
    return np.sqrt(var_x * var_p)


_OBJECTIVES = {"reciprocity": hermite_products, "uncertainty": uncertainty_products}


# --- search -------------------------------------------------------------

def _search(config: SearchConfig, objective: str, block: int = 4096) -> SearchResult:
    evaluate = _OBJECTIVES[objective]
    best, best_c = math.inf, None
    history = []
    done = 0
    target = config.num_samples
    converged = not config.doubling
    previous = None
    for _ in range(MAX_DOUBLINGS + 1):
        while done < target:
            stop = min(target, done + block)
            c = sample_block(config, done, stop)
            vals = evaluate(c)
            i = int(np.argmin(vals))
            if vals[i] < best:
                best, best_c = float(vals[i]), c[i]
            done = stop
        history.append((done, best))
        if not config.doubling:
            break
        if previous is not None and previous - best < CONVERGENCE_THRESHOLD:
            converged = True
            break
        previous = best
        target *= 2
    return SearchResult(best, best_c, done, converged, history, objective)


def minimize_reciprocity(config: SearchConfig, polish: bool = False) -> SearchResult:
    """Smallest sampled reciprocity product; ``polish`` adds a local refinement."""
    result = _search(config, "reciprocity")
    if polish:
        c, v = polish_minimum(result.argmin_coeffs, hermite_products, config.field)
        result.polished_product, result.polished_coeffs = v, c
    return result


def minimize_uncertainty(config: SearchConfig, polish: bool = False) -> SearchResult:
    """Smallest sampled dx dp / hbar (closed-form moments)."""
    result = _search(config, "uncertainty")
    if polish:
        c, v = polish_minimum(result.argmin_coeffs, uncertainty_products, config.field)
        result.polished_product, result.polished_coeffs = v, c
    return result


# --- local polish ----------------------------------------------------------

def _to_chart(c: np.ndarray, real: bool) -> np.ndarray:
    # fix the global phase so c_0 is real and non-negative
    c = c * np.exp(-1j * np.angle(c[0])) if abs(c[0]) > 0 else c
    return c.real.copy() if real else np.concatenate([c.real, c.imag[1:]])


def _from_chart(v: np.ndarray, size: int, real: bool) -> np.ndarray:
    if real:
        c = v.astype(complex)
    else:
        c = v[:size] + 1j * np.concatenate([[0.0], v[size:]])
    return c / np.linalg.norm(c)


def polish_minimum(coeffs, objective: Callable, field: str = "complex",
                   budget: int = POLISH_BUDGET, step: float = 0.05):
    """Coordinate-wise golden-section descent in a phase-fixed sphere chart.

    Returns ``(coefficients, value)``; never worse than the starting point.
    """
    c0 = np.asarray(coeffs, dtype=complex)
    size = c0.size
    real = field == "real"
    v = _to_chart(c0, real)
    used = 0

    def f(u):
        nonlocal used
        used += 1
        return float(objective(_from_chart(u, size, real)[None, :])[0])

    best = f(v)
    while used < budget:
        improved = False
        for k in range(v.size):
            if used + 6 > budget:
                break
            a, b = v[k] - step, v[k] + step
            x1, x2 = b - _GOLDEN * (b - a), a + _GOLDEN * (b - a)
            trial = v.copy()
            trial[k] = x1
            f1 = f(trial)
            trial[k] = x2
            f2 = f(trial)
            for _ in range(4):
                if f1 < f2:
                    b, x2, f2 = x2, x1, f1
                    x1 = b - _GOLDEN * (b - a)
                    trial[k] = x1
                    f1 = f(trial)
                else:
                    a, x1, f1 = x1, x2, f2
                    x2 = a + _GOLDEN * (b - a)
                    trial[k] = x2
                    f2 = f(trial)
            xk, fk = (x1, f1) if f1 < f2 else (x2, f2)
            if fk < best:
                v[k], best, improved = xk, fk, True
        if not improved:
            step *= 0.5
            if step < 1e-6:
                break
    return _from_chart(v, size, real), best
