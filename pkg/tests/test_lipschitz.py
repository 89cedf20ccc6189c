import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as hs

from qrecip import states as st
from qrecip.lipschitz import (LINEAR, QUADRATIC, DivergenceFit, PuncturedDomain,
                              RankDeficientError, default_epsilons, epsilon_sweep,
                              fit_divergence, lipschitz_constant, lipschitz_on_punctured,
                              pair_ratio_validator)


def normal(sigma2):
    f = lambda x: np.exp(-x * x / (2 * sigma2)) / math.sqrt(2 * math.pi * sigma2)
    df = lambda x: -x / sigma2 * f(x)
    return f, df


def gaussian_lc(sigma2):
    return 1.0 / (sigma2 * math.sqrt(2 * math.pi * math.e))


def cauchy(gamma):
    f = lambda x: gamma / math.pi / (x * x + gamma * gamma)
    df = lambda x: -2 * gamma * x / (math.pi * (x * x + gamma * gamma) ** 2)
    return f, df


class TestClosedForms:
    @pytest.mark.parametrize("sigma2", [0.5, 1.0, 3.0])
    def test_gaussian(self, sigma2):
        f, df = normal(sigma2)
        half = 12 * math.sqrt(sigma2)
        est = lipschitz_constant(f, (-half, half), df)
        assert est.value == pytest.approx(gaussian_lc(sigma2), rel=1e-10)
        assert abs(est.argmax_x) == pytest.approx(math.sqrt(sigma2), rel=1e-6)
        assert est.refined and not est.divergent
        assert est.value >= est.coarse_value
        assert est.coarse_grid_points == 2 ** 16

    def test_gaussian_by_differences(self):
        f, _ = normal(1.0)
        est = lipschitz_constant(f, (-12, 12))
        assert est.value == pytest.approx(gaussian_lc(1.0), rel=1e-6)

    def test_gaussian_automatic_support(self):
        f, df = normal(1.0)
        assert lipschitz_constant(f, None, df).value == pytest.approx(gaussian_lc(1.0), rel=1e-10)

    def test_cauchy(self):
        s = st.CauchyLorentz()
        est = lipschitz_constant(lambda x: st.position_density(s, x), (-200, 200),
                                 lambda x: st.position_density_derivative(s, x))
        assert est.value == pytest.approx(0.206748335783172019, rel=1e-6)

    def test_student2(self):
        s = st.StudentT(2)
        est = lipschitz_constant(lambda x: st.position_density(s, x), (-300, 300),
                                 lambda x: st.position_density_derivative(s, x))
        assert est.value == pytest.approx(12 / (25 * math.sqrt(5)), rel=1e-6)


class TestDilation:
    @pytest.mark.parametrize("s", [0.5, 2.0, 10.0])
    @pytest.mark.parametrize("family", ["gauss", "cauchy"])
    def test_scaling(self, family, s):
        f, df = normal(1.0) if family == "gauss" else cauchy(1.0)
        half = 12.0 if family == "gauss" else 200.0
        base = lipschitz_constant(f, (-half, half), df).value
        scaled = lipschitz_constant(lambda x: s * f(s * x), (-half / s, half / s),
                                    lambda x: s * s * df(s * x)).value
        assert scaled == pytest.approx(s * s * base, rel=1e-8)


class TestDivergence:
    @pytest.mark.parametrize("state", [st.CauchyLorentz(), st.StudentT(2)], ids=repr)
    def test_cusp_is_flagged(self, state):
        support = st.momentum_support(state)
        est = lipschitz_constant(lambda p: st.momentum_density(state, p), (-support, support),
                                 lambda p: st.momentum_density_derivative(state, p))
        assert est.divergent
        assert abs(est.argmax_x) < 1e-6
        assert est.value > est.coarse_value

    def test_smooth_peak_is_not_flagged(self):
        f, df = normal(0.01)
        assert not lipschitz_constant(f, (-2, 2), df).divergent

    def test_divergence_factor_is_adjustable(self):
        s = st.StudentT(2)
        kwargs = dict(domain=(-30, 30), df=lambda p: st.momentum_density_derivative(s, p))
        g = lambda p: st.momentum_density(s, p)
        assert lipschitz_constant(g, **kwargs).divergent
        assert not lipschitz_constant(g, divergence_factor=1e6, **kwargs).divergent


class TestPunctured:
    def test_gaussian_unchanged_for_small_eps(self):
        f, df = normal(1.0)
        full = lipschitz_constant(f, (-12, 12), df).value
        for eps in (1e-3, 0.5, 1.0):
            assert lipschitz_on_punctured(f, eps, df, 12.0).value == pytest.approx(full, rel=1e-10)

    def test_boundary_point_included(self):
        # |f'| of a Cauchy momentum density peaks at the puncture itself
        s = st.CauchyLorentz()
        g = lambda p: st.momentum_density(s, p)
        dg = lambda p: st.momentum_density_derivative(s, p)
        est = lipschitz_on_punctured(g, 0.01, dg, 40.0)
        assert abs(est.argmax_x) == pytest.approx(0.01)
        assert est.value == pytest.approx(abs(dg(0.01)), rel=1e-12)
        assert not est.divergent

    @pytest.mark.parametrize("state", [st.CauchyLorentz(), st.StudentT(2), st.SHO(3),
                                       st.HermiteSuperposition.normalized([1, 1j, 0.3])], ids=repr)
    def test_monotone_in_epsilon(self, state):
        g = lambda p: st.momentum_density(state, p)
        dg = lambda p: st.momentum_density_derivative(state, p)
        sweep = epsilon_sweep(g, default_epsilons(1e-3, 1e-1, 8), dg, st.momentum_support(state),
                              n_grid=2 ** 14)
        values = [est.value for _, est in sweep]
        assert all(b >= a * (1 - 1e-12) for a, b in zip(values, values[1:]))

    def test_domain_validation(self):
        with pytest.raises(ValueError):
            PuncturedDomain(0.0)
        with pytest.raises(ValueError):
            PuncturedDomain(2.0).intervals(1.0)


class TestPairRatio:
    def test_gaussian_bound(self):
        f, _ = normal(1.0)
        assert pair_ratio_validator(f, (-12, 12), 10 ** 5) <= gaussian_lc(1.0) * (1 + 1e-9)

    def test_constant(self):
        assert pair_ratio_validator(lambda x: np.full_like(x, 0.3), (-1, 1), 1000) == 0.0

    def test_absolute_value(self):
        assert pair_ratio_validator(np.abs, (-1, 1), 1000) == pytest.approx(1.0, abs=1e-9)

    def test_rejects_zero_pairs(self):
        with pytest.raises(ValueError):
            pair_ratio_validator(np.abs, (-1, 1), 0)

    @pytest.mark.parametrize("state", [st.SHO(0), st.SHO(9), st.CauchyLorentz(0.3, 2.0),
                                       st.StudentT(2), st.StudentT(6),
                                       st.HermiteSuperposition.normalized([0.2, -1, 0.5j, 0.7])],
                             ids=repr)
    def test_soundness_on_catalog(self, state):
        c, half = st.center(state), st.position_support(state)
        f = lambda x: st.position_density(state, x)
        est = lipschitz_constant(f, (c - half, c + half), lambda x: st.position_density_derivative(state, x))
        witness = pair_ratio_validator(f, (c - half, c + half), 20000, seed=1, n_grid=2 ** 16)
        assert witness <= est.value * (1 + 1e-9)
        assert witness >= 0.99 * est.value


class TestFit:
    def test_exact_linear(self):
        eps = default_epsilons(1e-3, 1e-1, 10)
        fit = fit_divergence([(e, 5 / e + 3) for e in eps], "linear")
        assert fit.model == LINEAR
        np.testing.assert_allclose(fit.coefficients, (5, 3), rtol=1e-10)
        assert fit.r_squared == pytest.approx(1.0)

    def test_exact_quadratic(self):
        eps = default_epsilons(1e-4, 1e-1, 12)
        t = np.log(1 / eps)
        fit = fit_divergence(list(zip(eps, 2.5 * t ** 2 - t + 4)), QUADRATIC)
        np.testing.assert_allclose(fit.coefficients, (2.5, -1, 4), rtol=1e-9)
        np.testing.assert_allclose(fit.predict(eps), 2.5 * t ** 2 - t + 4, rtol=1e-10)

    def test_r_squared_in_unit_interval(self):
        rng = np.random.default_rng(3)
        eps = default_epsilons(1e-3, 1e-1, 24)
        fit = fit_divergence(list(zip(eps, rng.normal(size=24))), "quadratic")
        assert 0.0 <= fit.r_squared <= 1.0

    def test_too_few_samples(self):
        with pytest.raises(ValueError):
            fit_divergence([(0.1, 1), (0.01, 2), (0.001, 3)], "linear")

    def test_order_required(self):
        with pytest.raises(ValueError):
            fit_divergence([(0.001, 1), (0.01, 2), (0.1, 3), (0.5, 4)], "linear")

    def test_rank_deficient(self):
        eps = [1 + 4e-16, 1 + 2e-16, 1.0, 1 - 1.1e-16]
        with pytest.raises(RankDeficientError):
            fit_divergence([(e, 1.0) for e in eps], "quadratic")

    def test_unknown_model(self):
        with pytest.raises(ValueError):
            fit_divergence([(0.1, 1)] * 4, "cubic")

    def test_epsilons(self):
        e = default_epsilons()
        assert e.size == 24 and e[0] == pytest.approx(0.1) and e[-1] == pytest.approx(1e-3)
        assert np.all(np.diff(e) < 0)

    def test_as_dict(self):
        d = DivergenceFit(LINEAR, (1.0, 2.0), 0.5).as_dict()
        assert d == {"model": LINEAR, "coefficients": [1.0, 2.0], "r_squared": 0.5}


class TestErrors:
    def test_empty_interval(self):
        with pytest.raises(ValueError):
            lipschitz_constant(np.abs, (1.0, 1.0))

    def test_non_finite_values(self):
        with pytest.raises(ValueError):
            with np.errstate(divide="ignore"):
                lipschitz_constant(lambda x: 1 / x, (0.0, 1.0))

    def test_nan(self):
        with pytest.raises(ValueError):
            lipschitz_constant(lambda x: np.full_like(x, np.nan), (0, 1))


@settings(max_examples=25, deadline=None)
@given(hs.floats(0.2, 5.0), hs.floats(-3, 3))
def test_shifted_gaussian_property(sigma2, mu):
    f, df = normal(sigma2)
    half = 12 * math.sqrt(sigma2)
    est = lipschitz_constant(lambda x: f(x - mu), (mu - half, mu + half), lambda x: df(x - mu),
                             n_grid=2 ** 12)
    assert est.value == pytest.approx(gaussian_lc(sigma2), rel=1e-9)


def test_one_sided_differences_point_away():
    # |x|^(3/2) has an unbounded second derivative at 0; a stencil pointing
    # away from 0 only sees the smooth branch on its own side
    from qrecip.lipschitz import _finite_difference
    f = lambda x: np.abs(x) ** 1.5
    x = np.array([-1e-3, 1e-3])
    central = _finite_difference(f, x, -1.0, 1.0)
    away = _finite_difference(f, x, -1.0, 1.0, away=0.0)
    exact = 1.5 * np.sign(x) * np.abs(x) ** 0.5
    assert np.allclose(away, exact, rtol=1e-6)
    assert np.allclose(central, exact, rtol=1e-3)


def test_fd_cusp_refinement_stays_divergent():
    s = st.StudentT(2)
    lim = st.momentum_support(s)
    est = lipschitz_constant(lambda p: st.momentum_density(s, p), (-lim, lim))
    assert est.divergent
