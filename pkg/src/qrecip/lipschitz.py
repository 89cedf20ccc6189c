"""Lipschitz constants of one-dimensional densities.

For a differentiable density the Lipschitz constant on an interval is the
supremum of |f'|.  The estimator scans |f'| on a uniform grid, refines the
largest local maxima by bisection on the sign of d|f'|/dx, and probes the
refined maxima for unbounded growth (a cusp or pole of the derivative).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.interpolate import PchipInterpolator

DEFAULT_GRID = 2 ** 16
DEFAULT_TOP_K = 8
DEFAULT_RTOL = 1e-10
DIVERGENCE_FACTOR = 10.0
FLAG_RATIO = 1e6
PROBE_LEVELS = 2

LINEAR = "linear_in_inverse_epsilon"
QUADRATIC = "quadratic_in_log_inverse_epsilon"
_MODEL_ALIASES = {"linear": LINEAR, "quadratic": QUADRATIC, LINEAR: LINEAR, QUADRATIC: QUADRATIC}


class RankDeficientError(ValueError):
    """The divergence-fit design matrix does not have full column rank."""


@dataclass(frozen=True)
class LipschitzEstimate:
    value: float
    argmax_x: float
    coarse_grid_points: int
    refined: bool
    divergent: bool
    coarse_value: float

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class PuncturedDomain:
    """The set (-inf, -epsilon] U [epsilon, inf)."""

    epsilon: float

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError(f"epsilon must be positive, got {self.epsilon!r}")

    def intervals(self, support: float):
        if support <= self.epsilon:
            raise ValueError("support must extend beyond epsilon")
        return [(-support, -self.epsilon), (self.epsilon, support)]


@dataclass(frozen=True)
class DivergenceFit:
    model: str
    coefficients: tuple
    r_squared: float

    def predict(self, epsilon):
        t = _fit_abscissa(self.model, np.asarray(epsilon, dtype=float))
        return np.polyval(self.coefficients, t)

    def as_dict(self) -> dict:
        return {"model": self.model, "coefficients": list(self.coefficients),
                "r_squared": self.r_squared}


# --- helpers --------------------------------------------------------------

def _auto_support(f: Callable, center: float = 0.0) -> float:
    half = 1.0
    while half < 1e6:
        x = center + np.linspace(-half, half, 2049)
        peak = np.max(np.abs(f(x)))
        edge = max(abs(float(f(center - half))), abs(float(f(center + half))))
        if edge <= 1e-12 * peak:
            break
        half *= 2.0
    return half


def _normalize_domain(f, domain) -> list:
    if domain is None:
        half = _auto_support(f)
        return [(-half, half)]
    if isinstance(domain, PuncturedDomain):
        return domain.intervals(_auto_support(f))
    if len(domain) == 2 and np.isscalar(domain[0]):
        domain = [tuple(domain)]
    out = []
    for lo, hi in domain:
        lo, hi = float(lo), float(hi)
        if not hi > lo:
            raise ValueError(f"empty interval [{lo}, {hi}]")
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ValueError("intervals must be finite; pass a support width")
        out.append((lo, hi))
    if not out:
        raise ValueError("domain is empty")
    return out


def _finite_difference(f: Callable, x, lo: float, hi: float, away: Optional[float] = None):
    """f' by central differences, second-order one-sided near the edges.

    With ``away`` set, every stencil is one-sided and points away from that
    point, so no stencil straddles a cusp located there.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    h = np.maximum(1e-6, 1e-8 * np.abs(x))
    h = np.minimum(h, 0.25 * (hi - lo))
    out = np.empty_like(x)
    if away is None:
        central = (x - h >= lo) & (x + h <= hi)
        fwd = ~central & (x - h < lo)
    else:
        central = np.zeros(x.shape, dtype=bool)
        fwd = (x >= away) & (x + 2 * h <= hi) | (x - 2 * h < lo)
    if np.any(central):
        xc, hc = x[central], h[central]
        out[central] = (f(xc + hc) - f(xc - hc)) / (2 * hc)
    if np.any(fwd):
        xf, hf = x[fwd], h[fwd]
        out[fwd] = (-3 * f(xf) + 4 * f(xf + hf) - f(xf + 2 * hf)) / (2 * hf)
    bwd = ~central & ~fwd
    if np.any(bwd):
        xb, hb = x[bwd], h[bwd]
        out[bwd] = (3 * f(xb) - 4 * f(xb - hb) + f(xb - 2 * hb)) / (2 * hb)
    return out


def _make_slope(f, df, lo, hi):
    if df is not None:
        def slope(x, away=None):
            return np.abs(np.atleast_1d(np.asarray(df(np.atleast_1d(x)), dtype=float)))
    else:
        def slope(x, away=None):
            return np.abs(_finite_difference(f, x, lo, hi, away))

    def safe(x, away=None):
        v = slope(x, away)
        # a non-finite slope is the signature of a singular point
        return np.where(np.isfinite(v), v, math.inf)
    return safe


def _local_maxima(values: np.ndarray) -> np.ndarray:
    n = values.size
    left = np.concatenate([[-np.inf], values[:-1]])
    right = np.concatenate([values[1:], [-np.inf]])
    idx = np.flatnonzero((values >= left) & (values >= right))
    return idx if idx.size else np.arange(n)


def _bisect_max(slope, a: float, b: float, lo: float, hi: float, rtol: float, scale: float,
                one_sided: bool = False):
    """Locate a maximum of |f'| in [a, b] by bisection on the sign of d|f'|/dx.

    ``one_sided`` (used near flagged cusps) evaluates the two probes with
    stencils pointing away from the midpoint.
    """
    best_x, best_v = a, -1.0
    for x in (a, b, 0.5 * (a + b)):
        v = float(slope(x)[0])
        if v > best_v:
            best_x, best_v = x, v
    floor = rtol * scale
    while b - a > max(rtol * max(abs(a), abs(b)), floor):
        m = 0.5 * (a + b)
        d = 1e-3 * (b - a)
        left, right = slope(np.array([max(lo, m - d), min(hi, m + d)]), m if one_sided else None)
        for x, v in ((m - d, left), (m + d, right)):
            if v > best_v and lo <= x <= hi:
                best_x, best_v = x, float(v)
        if right > left:
            a = m
        else:
            b = m
    m = 0.5 * (a + b)
    v = float(slope(m)[0])
    if v >= best_v:
        best_x, best_v = m, v
    return best_x, best_v


def _probe_growth(slope, x: float, spacing: float, lo: float, hi: float):
    """max |f'| at distances spacing * 10^-k from x, k = 0 .. PROBE_LEVELS."""
    levels = []
    for k in range(PROBE_LEVELS + 1):
        d = spacing * 10.0 ** (-k)
        pts = [p for p in (x - d, x + d) if lo <= p <= hi]
        levels.append(float(np.max(slope(np.array(pts)))) if pts else 0.0)
    return levels


def _flagged_points(x: np.ndarray, fx: np.ndarray, ratio: float) -> list:
    """Grid indices whose second difference exceeds ``ratio`` x the median."""
    if x.size < 5:
        return []
    d2 = np.abs(fx[2:] - 2 * fx[1:-1] + fx[:-2])
    body = np.maximum(np.abs(fx[2:]), np.abs(fx[:-2])) > 1e-6 * np.max(np.abs(fx))
    ref = d2[body & (d2 > 0)]
    if ref.size == 0:
        return []
    hits = np.flatnonzero(d2 > ratio * np.median(ref)) + 1
    if hits.size == 0:
        return []
    # one representative (largest second difference) per run of adjacent hits
    runs = np.split(hits, np.flatnonzero(np.diff(hits) > 1) + 1)
    reps = [int(r[np.argmax(d2[r - 1])]) for r in runs]
    reps.sort(key=lambda i: -d2[i - 1])
    return reps[:4]


# --- public estimators ----------------------------------------------------

def lipschitz_constant(
    f: Callable,
    domain=None,
    df: Optional[Callable] = None,
    *,
    n_grid: int = DEFAULT_GRID,
    top_k: int = DEFAULT_TOP_K,
    rtol: float = DEFAULT_RTOL,
    divergence_factor: float = DIVERGENCE_FACTOR,
    flag_ratio: float = FLAG_RATIO,
    samples: Optional[tuple] = None,
) -> LipschitzEstimate:
    """Estimate sup |f'| over ``domain``.

    ``domain`` is ``None`` (whole line, support found automatically), an
    interval ``(a, b)``, a list of intervals, or a :class:`PuncturedDomain`.
    ``df`` is the analytic derivative; without it central differences are
    used.  ``samples=(grid, values)`` supplies a tabulated density that is used
    (through a monotone cubic interpolant) only to bracket the maxima; every
    refinement step evaluates ``f`` itself.
    """
    intervals = _normalize_domain(f, domain)
    total = sum(hi - lo for lo, hi in intervals)
    candidates = []
    grid_points = 0
    coarse_best = 0.0
    coarse_at = intervals[0][0]

    for lo, hi in intervals:
        slope = _make_slope(f, df, lo, hi)
        if samples is not None:
            sx, sv = (np.asarray(a, dtype=float) for a in samples)
            keep = (sx >= lo) & (sx <= hi)
            x = sx[keep]
            fx = np.real(sv[keep])
            if x.size < 4:
                raise ValueError("too few samples inside the domain")
            coarse = np.abs(PchipInterpolator(x, fx).derivative()(x))
        else:
            n = max(16, int(round(n_grid * (hi - lo) / total)))
            x = np.linspace(lo, hi, n)
            fx = np.asarray(f(x), dtype=float)
            if not np.all(np.isfinite(fx)):
                raise ValueError("density returned non-finite values on the coarse grid")
            coarse = slope(x)
            if not np.all(np.isfinite(coarse)):
                raise ValueError("derivative returned non-finite values on the coarse grid")
        grid_points += x.size
        spacing = (hi - lo) / (x.size - 1)

        peaks = _local_maxima(coarse)
        peaks = peaks[np.argsort(-coarse[peaks])][:top_k]
        flagged = _flagged_points(x, fx, flag_ratio)
        for i in list(peaks):
            candidates.append((lo, hi, spacing, x[max(i - 1, 0)], x[min(i + 1, x.size - 1)],
                               False, slope))
        for i in flagged:
            candidates.append((lo, hi, spacing, x[max(i - 1, 0)], x[min(i + 1, x.size - 1)],
                               True, slope))
        if samples is None:
            i = int(np.argmax(coarse))
            if coarse[i] > coarse_best:
                coarse_best, coarse_at = float(coarse[i]), float(x[i])

    if samples is not None:
        # tabulated slopes are not bounds; re-evaluate at the bracket centres
        for lo, hi, _, a, b, _, slope in candidates:
            xc = 0.5 * (a + b)
            v = float(slope(xc)[0])
            if v > coarse_best:
                coarse_best, coarse_at = v, xc

    best_v, best_x, divergent = coarse_best, coarse_at, False
    seen = set()
    for lo, hi, spacing, a, b, one_sided, slope in candidates:
        if (a, b, one_sided) in seen:
            continue
        seen.add((a, b, one_sided))
        xr, vr = _bisect_max(slope, a, b, lo, hi, rtol, total, one_sided)
        levels = _probe_growth(slope, xr, spacing, lo, hi)
        if levels[0] > 0 and levels[-1] > divergence_factor * levels[0]:
            # growth without bound: report the finest probe as a lower bound
            if not divergent or levels[-1] > best_v:
                best_v, best_x = max(levels[-1], coarse_best), xr
            divergent = True
        elif not divergent and vr > best_v:
            best_v, best_x = vr, xr
    return LipschitzEstimate(float(best_v), float(best_x), int(grid_points), True,
                             divergent, float(coarse_best))


def lipschitz_on_punctured(g: Callable, eps, dg: Optional[Callable] = None,
                           support: Optional[float] = None, **kwargs) -> LipschitzEstimate:
    """Lipschitz constant of ``g`` restricted to |p| >= epsilon.

    The points +-epsilon belong to the domain, so their one-sided derivatives
    take part in the supremum.
    """
    if not isinstance(eps, PuncturedDomain):
        eps = PuncturedDomain(float(eps))
    if support is None:
        support = _auto_support(g)
    return lipschitz_constant(g, eps.intervals(support), dg, **kwargs)


def default_epsilons(eps_min: float = 1e-3, eps_max: float = 1e-1, points: int = 24) -> np.ndarray:
    """Log-spaced epsilons in strictly decreasing order."""
    if not 0 < eps_min < eps_max:
        raise ValueError("need 0 < eps_min < eps_max")
    if points < 2:
        raise ValueError("need at least two epsilons")
    return np.logspace(math.log10(eps_max), math.log10(eps_min), points)


def epsilon_sweep(g: Callable, epsilons: Sequence[float], dg: Optional[Callable] = None,
                  support: Optional[float] = None, **kwargs) -> list:
    """``[(epsilon, LipschitzEstimate), ...]`` on the punctured domains."""
    return [(float(e), lipschitz_on_punctured(g, e, dg, support, **kwargs)) for e in epsilons]


def pair_ratio_validator(f: Callable, domain, n_pairs: int, seed: int = 0,
                         n_grid: int = 4096) -> float:
    """Largest secant slope |f(x1) - f(x2)| / |x1 - x2| over sampled pairs.

    Pairs are every adjacent pair of a uniform grid on each interval plus
    ``n_pairs`` stratified random pairs (half short-range, half arbitrary).
    Any secant slope is a lower bound for the Lipschitz constant.
    """
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    intervals = _normalize_domain(f, domain)
    lengths = np.array([hi - lo for lo, hi in intervals])
    total = lengths.sum()
    best = 0.0
    for lo, hi in intervals:
        n = max(2, int(round(n_grid * (hi - lo) / total)))
        x = np.linspace(lo, hi, n)
        fx = np.asarray(f(x), dtype=float)
        best = max(best, float(np.max(np.abs(np.diff(fx)) / np.diff(x))))

    rng = np.random.default_rng(seed)
    starts = np.concatenate([[0.0], np.cumsum(lengths)])

    def place(u):
        # map [0, total) onto the union of intervals
        k = np.clip(np.searchsorted(starts, u, side="right") - 1, 0, len(intervals) - 1)
        lo = np.array([intervals[j][0] for j in k])
        hi = np.array([intervals[j][1] for j in k])
        return np.clip(lo + (u - starts[k]), lo, hi), lo, hi

    u1 = (np.arange(n_pairs) + rng.random(n_pairs)) / n_pairs * total
    x1, lo1, hi1 = place(u1)
    n_local = n_pairs // 2
    width = total / n_pairs
    offsets = rng.standard_normal(n_local) * width
    x2_local = np.clip(x1[:n_local] + offsets, lo1[:n_local], hi1[:n_local])
    x2_far, _, _ = place(rng.random(n_pairs - n_local) * total)
    x2 = np.concatenate([x2_local, x2_far])
    sep = np.abs(x1 - x2)
    ok = sep > 0
    if np.any(ok):
        ratios = np.abs(np.asarray(f(x1[ok])) - np.asarray(f(x2[ok]))) / sep[ok]
        best = max(best, float(np.max(ratios)))
    return best


def _fit_abscissa(model: str, eps: np.ndarray) -> np.ndarray:
    return 1.0 / eps if model == LINEAR else np.log(1.0 / eps)


def fit_divergence(samples: Sequence[tuple], model: str) -> DivergenceFit:
    """Least-squares fit of LC against 1/eps (linear) or ln(1/eps) (quadratic).

    Coefficients are ordered highest power first.
    """
    try:
        model = _MODEL_ALIASES[model]
    except KeyError:
        raise ValueError(f"unknown divergence model {model!r}") from None
    eps = np.array([s[0] for s in samples], dtype=float)
    lc = np.array([s[1] for s in samples], dtype=float)
    if eps.size < 4:
        raise ValueError("need at least 4 samples")
    if np.any(np.diff(eps) >= 0):
        raise ValueError("epsilons must be strictly decreasing")
    degree = 1 if model == LINEAR else 2
    design = np.vander(_fit_abscissa(model, eps), degree + 1)
    if np.linalg.matrix_rank(design) < degree + 1:
        raise RankDeficientError("design matrix is rank-deficient")
    coef, *_ = np.linalg.lstsq(design, lc, rcond=None)
    resid = lc - design @ coef
    ss_res = float(resid @ resid)
    ss_tot = float(np.sum((lc - lc.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    return DivergenceFit(model, tuple(float(c) for c in coef), r2)
