import math

import numpy as np
import pytest
from scipy import integrate as sci

from qrecip import states as st
from qrecip.specfun import bessel_k_array, hermite_function


def _cos_transform(psi, p):
    """Independent oracle: QUADPACK Fourier-integral routine on [0, inf)."""
    val, _ = sci.quad(psi, 0.0, np.inf, weight="cos", wvar=p, limlst=200)
    return 2.0 * val / math.sqrt(2.0 * math.pi)


class TestValidation:
    @pytest.mark.parametrize("bad", [
        lambda: st.SHO(-1), lambda: st.SHO(1.5), lambda: st.SHO(65), lambda: st.SHO(0, 0.0),
        lambda: st.CauchyLorentz(0.0, -1.0), lambda: st.StudentT(1), lambda: st.StudentT(2.5),
        lambda: st.HermiteSuperposition((1.0, 1.0)), lambda: st.HermiteSuperposition(()),
    ])
    def test_rejects(self, bad):
        with pytest.raises(ValueError):
            bad()

    def test_normalized_constructor(self):
        s = st.HermiteSuperposition.normalized([1, 1j, 2])
        assert sum(abs(c) ** 2 for c in s.coeffs) == pytest.approx(1, abs=1e-15)
        assert s.degree == 2


CATALOG = [st.SHO(0), st.SHO(5, 2.0), st.SHO(40), st.CauchyLorentz(1.0, 0.5),
           st.StudentT(2), st.StudentT(3), st.StudentT(50),
           st.HermiteSuperposition.normalized([0.3, -0.2j, 0.5, 1, 0.1 + 0.4j])]


@pytest.mark.parametrize("state", CATALOG, ids=repr)
def test_normalization(state):
    assert st.normalization_residual(state) < 1e-10


@pytest.mark.parametrize("state", CATALOG, ids=repr)
def test_position_derivative_matches_differences(state):
    x = np.linspace(-6, 6, 37) + 0.013
    np.testing.assert_allclose(st.position_density_derivative(state, x),
                               st.position_density_derivative(state, x, analytic=False),
                               atol=1e-7)


class TestMomentum:
    def test_sho_eigenfunction_phase(self):
        p = np.linspace(-5, 5, 21)
        for n in range(5):
            expected = (-1j) ** n * hermite_function(n, p)
            np.testing.assert_allclose(st.momentum_wavefunction(st.SHO(n), p), expected, atol=1e-15)

    @pytest.mark.parametrize("state", [st.SHO(3, 0.7), st.HermiteSuperposition.normalized([1, 1j, -0.5, 0.3])],
                             ids=repr)
    def test_analytic_matches_fft(self, state):
        phi = st.momentum_samples(state)
        keep = np.abs(phi.grid) < 8
        np.testing.assert_allclose(phi.values[keep],
                                   st.momentum_wavefunction(state, phi.grid[keep]), atol=1e-10)

    def test_cauchy_closed_form_against_fft(self):
        state = st.CauchyLorentz(0.5, 1.0)
        phi = st.momentum_samples(state)
        p = phi.grid
        keep = (np.abs(p) > 0.05) & (np.abs(p) < 6)
        np.testing.assert_allclose(phi.values[keep], st.momentum_wavefunction(state, p[keep]),
                                   atol=1e-11)

    def test_cauchy_closed_form_against_quadpack(self):
        state = st.CauchyLorentz(0.0, 2.0)
        psi = lambda x: math.sqrt(st.position_density(state, x))
        for p in (0.05, 0.4, 2.0):
            assert st.momentum_wavefunction(state, p).real == pytest.approx(
                _cos_transform(psi, p), rel=1e-7)

    def test_student2_closed_form_against_quadpack(self):
        state = st.StudentT(2)
        psi = lambda x: math.sqrt(st.position_density(state, x))
        for p in (0.02, 0.5, 3.0):
            assert st.momentum_wavefunction(state, p) == pytest.approx(_cos_transform(psi, p), rel=1e-7)

    def test_student3_exponential_closed_form(self):
        # dof = 3: the momentum density is sqrt(3) exp(-2 sqrt(3) |p|)
        state = st.StudentT(3)
        p = np.array([1e-4, 0.05, 0.5, 2.0])
        np.testing.assert_allclose(st.momentum_density(state, p),
                                   math.sqrt(3) * np.exp(-2 * math.sqrt(3) * p), rtol=1e-10)

    def test_student5_bessel_closed_form(self):
        # dof = 5: phi is proportional to |p| K_1(sqrt(5) |p|)
        state = st.StudentT(5)
        p = np.array([0.1, 0.7, 1.9, 4.0])
        ratio = st.momentum_wavefunction(state, p) / (p * bessel_k_array(1.0, math.sqrt(5) * p))
        np.testing.assert_allclose(ratio, ratio[0], rtol=1e-10)

    def test_student_fft_path_matches_slow_path(self):
        state = st.StudentT(3)
        phi = st.momentum_samples(state)
        keep = np.abs(phi.grid) < 4
        exact = math.sqrt(3) * np.exp(-2 * math.sqrt(3) * np.abs(phi.grid[keep]))
        np.testing.assert_allclose(np.abs(phi.values[keep]) ** 2, exact, atol=1e-11)

    def test_singular_points_return_sentinel(self):
        for state in (st.CauchyLorentz(), st.StudentT(2)):
            assert st.momentum_density(state, 0.0) == st.DIVERGENT
            assert np.isinf(st.momentum_density(state, np.array([0.0, 1.0]))[0])

    @pytest.mark.parametrize("state", [st.SHO(2), st.CauchyLorentz(0, 1.5), st.StudentT(2),
                                       st.HermiteSuperposition.normalized([1, 0.5j, 0.2])], ids=repr)
    def test_momentum_derivative_matches_differences(self, state):
        p = np.linspace(0.05, 4, 23)
        h = 1e-6
        fd = (st.momentum_density(state, p + h) - st.momentum_density(state, p - h)) / (2 * h)
        np.testing.assert_allclose(st.momentum_density_derivative(state, p), fd, rtol=1e-6, atol=1e-8)

    @pytest.mark.parametrize("state", [st.SHO(2), st.CauchyLorentz(0, 1.5), st.StudentT(2)], ids=repr)
    def test_momentum_derivative_is_odd(self, state):
        p = np.linspace(0.05, 4, 23)
        np.testing.assert_allclose(st.momentum_density_derivative(state, -p),
                                   -st.momentum_density_derivative(state, p), rtol=1e-12)

    def test_numeric_path_has_no_closed_derivative(self):
        assert st.momentum_density_derivative(st.StudentT(4), 0.3) is None
        assert not st.has_analytic_momentum(st.StudentT(4))


class TestTails:
    @pytest.mark.parametrize("state", [st.CauchyLorentz(0, 1.3), st.StudentT(2), st.StudentT(7)], ids=repr)
    def test_expansion_accuracy(self, state):
        x = np.array([60.0, 300.0, 2000.0])
        approx = sum(b * x ** -a for b, a in st.position_tail(state))
        np.testing.assert_allclose(approx, st.position_wavefunction(state, x), rtol=1e-8)

    def test_gaussian_states_have_no_tail(self):
        assert st.position_tail(st.SHO(1)) is None

    def test_tail_mass(self):
        assert st.tail_mass(st.CauchyLorentz(), 1.0) == pytest.approx(0.5)
        assert st.tail_mass(st.SHO(0), 100.0) == 0.0
        assert st.tail_mass(st.StudentT(3), 0.0) == pytest.approx(1.0, rel=1e-10)
