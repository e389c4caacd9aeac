import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.integrate import quad

import logistic_chain.special as special
from logistic_chain import (
    ConvergenceError,
    DomainError,
    Regime,
    RegimeTag,
    hypergeom_asymptotic,
    hypergeom_series,
    hypergeom_via_gamma,
    incomplete_gamma_lower,
    log_normal_cdf,
    normal_cdf,
)
from conftest import assert_log_close


def mp_series_log(A, z, nterms):
    """Extended-precision term-by-term summation oracle (mpmath, 50 digits)."""
    from mpmath import mp, mpf, log

    with mp.workdps(50):
        s, t = mpf(1), mpf(1)
        for n in range(nterms):
            t = t * mpf(z) / (mpf(A) + n)
            s += t
        return float(log(s))


class TestSeries:
    def test_z_zero_is_one(self):
        v = hypergeom_series(5.0, 0.0, rel_tol=1e-12)
        assert v.log_value == 0.0
        assert v.regime.kind is Regime.EXACT_SERIES

    def test_A_one_is_exponential(self):
        # at A = 1 every term is z^n/n!, so F(1, z) = e^z
        assert hypergeom_series(1.0, 3.0).log_value == pytest.approx(3.0, abs=1e-12)

    def test_matches_extended_precision_oracle(self):
        expected = mp_series_log(10, 7, 60)
        got = hypergeom_series(10.0, 7.0, rel_tol=1e-12).log_value
        assert_log_close(got, expected, 1e-10)

    def test_large_z_log_scale(self):
        # F explodes like e^(z-A); the log path must survive where floats cannot
        v = hypergeom_series(100.0, 5000.0)
        assert 4000 < v.log_value < 5000
        assert_log_close(v.log_value, mp_series_log(100, 5000, 12000), 1e-10)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            hypergeom_series(math.nan, 1.0)
        with pytest.raises(DomainError):
            hypergeom_series(5.0, -1.0)
        with pytest.raises(DomainError):
            hypergeom_series(0.5, 1.0)
        with pytest.raises(DomainError):
            hypergeom_series(5.0, 1.0, rel_tol=2.0)

    def test_convergence_cap_names_inputs(self, monkeypatch):
        monkeypatch.setattr(special, "MAX_SERIES_TERMS", 50)
        with pytest.raises(ConvergenceError, match="A=4.0, z=1000.0"):
            hypergeom_series(4.0, 1000.0)

    @settings(max_examples=60, deadline=None)
    @given(
        A=st.floats(min_value=1.5, max_value=200.0),
        z1=st.floats(min_value=0.0, max_value=300.0),
        dz=st.floats(min_value=0.0, max_value=50.0),
    )
    def test_monotone_in_z(self, A, z1, dz):
        lo = hypergeom_series(A, z1).log_value
        hi = hypergeom_series(A, z1 + dz).log_value
        assert hi >= lo - 1e-9

    @settings(max_examples=60, deadline=None)
    @given(A=st.floats(min_value=1.0, max_value=500.0), z=st.floats(min_value=0.0, max_value=1500.0))
    def test_log_value_nonnegative(self, A, z):
        assert hypergeom_series(A, z).log_value >= 0.0


class TestAsymptotic:
    def test_h_zero_is_regime_three_half(self):
        A = 1e6
        v = hypergeom_asymptotic(A, A, h_threshold=6.0)
        assert v.regime.kind is Regime.REGIME_III
        assert v.regime.h == 0.0
        expected = math.log(0.5) + 0.5 * math.log(2 * math.pi * A)
        assert v.log_value == pytest.approx(expected, abs=1e-12)

    def test_regime_one_example(self):
        A, z = 1e4, 5e3
        v = hypergeom_asymptotic(A, z)
        assert v.regime.kind is Regime.REGIME_I
        assert v.log_value == pytest.approx(math.log(2.0), abs=1e-12)
        exact = hypergeom_series(A, z).log_value
        assert_log_close(v.log_value, exact, 1e-2)

    def test_regime_two_example(self):
        A, z = 1e4, 2e4
        v = hypergeom_asymptotic(A, z)
        assert v.regime.kind is Regime.REGIME_II
        exact = hypergeom_series(A, z).log_value
        assert_log_close(v.log_value, exact, 1e-2)

    def test_gaussian_regimes_match_series(self):
        # the Gaussian regimes carry an O(h^3/sqrt(A)) defect, so the bound
        # loosens away from the diagonal
        A = 1e4
        for h, tol in ((2.0, 1e-2), (-2.0, 1e-2), (4.0, 3e-2), (-4.0, 3e-2)):
            z = A + h * math.sqrt(A)
            v = hypergeom_asymptotic(A, z)
            expected_kind = Regime.REGIME_III if h >= 0 else Regime.REGIME_IV
            assert v.regime.kind is expected_kind
            assert v.regime.h == pytest.approx(abs(h))
            exact = hypergeom_series(A, z).log_value
            assert_log_close(v.log_value, exact, tol, msg=f"h={h}")

    def test_threshold_switch_continuity(self):
        # invariant: crossing each regime switch at the default threshold
        # changes log F by < 2 % relative
        A = 1e4
        eps = 1e-6
        thr = special.DEFAULT_H_THRESHOLD
        for h_edge in (thr, -thr):
            z_in = A + (h_edge - math.copysign(eps, h_edge)) * math.sqrt(A)
            z_out = A + (h_edge + math.copysign(eps, h_edge)) * math.sqrt(A)
            inside = hypergeom_asymptotic(z=z_in, A=A).log_value
            outside = hypergeom_asymptotic(z=z_out, A=A).log_value
            assert_log_close(inside, outside, 2e-2, msg=f"switch at h={h_edge}")

    def test_error_decreases_with_A(self):
        # Theorem-1 convergence: each regime's log error shrinks as A grows
        reps = {
            "I": lambda A: A / 2,
            "II": lambda A: 2 * A,
            "III": lambda A: A + 2 * math.sqrt(A),
            "IV": lambda A: A - 2 * math.sqrt(A),
        }
        for name, zf in reps.items():
            errs = []
            for A in (1e2, 1e3, 1e4):
                z = zf(A)
                exact = hypergeom_series(A, z).log_value
                approx = hypergeom_asymptotic(A, z).log_value
                errs.append(abs(approx - exact) / max(1.0, abs(exact)))
            assert errs[0] > errs[1] > errs[2], f"regime {name}: {errs}"

    def test_negative_z_rejected(self):
        with pytest.raises(DomainError):
            hypergeom_asymptotic(1e4, -1.0)

    def test_tag_invariants(self):
        with pytest.raises(DomainError):
            RegimeTag(Regime.REGIME_III, h=None)
        with pytest.raises(DomainError):
            RegimeTag(Regime.REGIME_IV, h=-1.0)
        with pytest.raises(DomainError):
            RegimeTag(Regime.EXACT_SERIES, h=1.0)


class TestIncompleteGamma:
    def test_a_one_closed_form(self):
        assert incomplete_gamma_lower(1.0, 2.0) == pytest.approx(math.log(1 - math.exp(-2)), abs=1e-13)

    def test_complete_limit(self):
        # gamma(5, z) -> Gamma(5) = 24 as z -> inf
        assert incomplete_gamma_lower(5.0, 1e3) == pytest.approx(math.log(24.0), abs=1e-12)

    def test_quadrature_oracle(self):
        a, z = 3.5, 2.2
        oracle, err = quad(lambda t: t ** (a - 1) * math.exp(-t), 0.0, z, epsabs=1e-13, epsrel=1e-13)
        assert err < 1e-12
        got = math.exp(incomplete_gamma_lower(a, z))
        assert got == pytest.approx(oracle, rel=1e-9)

    def test_branch_split_is_seamless(self):
        # both sides of the series/continued-fraction boundary hit the
        # quadrature oracle at machine precision
        a = 4.0
        for z in (a + 1 - 1e-6, a + 1 + 1e-6):
            oracle, err = quad(lambda t: t ** (a - 1) * math.exp(-t), 0.0, z,
                               epsabs=1e-13, epsrel=1e-13)
            assert err < 1e-11
            assert incomplete_gamma_lower(a, z) == pytest.approx(math.log(oracle), abs=1e-12)

    def test_domain_errors(self):
        with pytest.raises(DomainError):
            incomplete_gamma_lower(0.0, 1.0)
        with pytest.raises(DomainError):
            incomplete_gamma_lower(1.0, -0.5)

    def test_z_zero(self):
        assert incomplete_gamma_lower(2.0, 0.0) == -math.inf


class TestViaGamma:
    def test_matches_series_at_spec_points(self):
        for A, z, tol in [(10.0, 7.0, 1e-8), (3.0, 1.0, 1e-10)]:
            s = hypergeom_series(A, z).log_value
            g = hypergeom_via_gamma(A, z).log_value
            assert abs(s - g) < tol

    def test_identity_path_keeps_exact_tag(self):
        v = hypergeom_via_gamma(50.0, 50.0)
        assert math.isfinite(v.log_value)
        assert v.regime.kind is Regime.EXACT_SERIES

    @settings(max_examples=80, deadline=None)
    @given(
        A=st.floats(min_value=3.0, max_value=100.0),
        frac=st.floats(min_value=1e-3, max_value=3.0),
    )
    def test_representation_identity(self, A, frac):
        z = frac * A
        s = hypergeom_series(A, z).log_value
        g = hypergeom_via_gamma(A, z).log_value
        assert abs(s - g) < 1e-8

    def test_domain(self):
        with pytest.raises(DomainError):
            hypergeom_via_gamma(2.0, 1.0)
        with pytest.raises(DomainError):
            hypergeom_via_gamma(3.0, 0.0)


class TestNormalCdf:
    def test_zero(self):
        assert normal_cdf(0.0) == 0.5

    @pytest.mark.parametrize("h", [0.5, 1.0, 2.0])
    def test_symmetry(self, h):
        assert normal_cdf(h) + normal_cdf(-h) == pytest.approx(1.0, abs=1e-12)

    def test_against_quadrature(self):
        density = lambda y: math.exp(-0.5 * y * y) / math.sqrt(2 * math.pi)
        oracle, err = quad(density, -10.0, 1.0, epsabs=1e-14)
        assert err < 1e-11
        assert normal_cdf(1.0) == pytest.approx(oracle, abs=1e-12)
        assert normal_cdf(1.0) == pytest.approx(0.841344746068543, abs=1e-12)

    def test_log_tail_is_smooth_at_switch(self):
        a = log_normal_cdf(-30.0 + 1e-9)
        b = log_normal_cdf(-30.0 - 1e-9)
        assert a == pytest.approx(b, rel=1e-6)

    @given(h=st.floats(min_value=-37.0, max_value=8.0))
    def test_log_matches_linear(self, h):
        assert log_normal_cdf(h) == pytest.approx(math.log(normal_cdf(h)), rel=1e-10)

    def test_nan_rejected(self):
        with pytest.raises(DomainError):
            normal_cdf(math.nan)
