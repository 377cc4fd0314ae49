"""
Unit tests for truncated Laurent series and the alpha expansions.
"""

import math

import mpmath
import numpy as np
import pytest

from app.exceptions import ArgumentError, SingularSeriesError
from app.services.laurent import (
    LaurentSeries,
    PowerSeries,
    alpha_laurent,
    series_add,
    series_derivative,
    series_div,
    series_mul,
    series_pow,
    stieltjes_constants,
    zeta_laurent,
)
from app.services.special import alpha_direct

GAMMA0 = float(np.euler_gamma)


class TestSeriesArithmetic:
    """Tests for the truncated series operations."""

    def test_normalization_strips_leading_zeros(self):
        """Leading zero coefficients raise the valuation."""
        series = LaurentSeries(-2, np.array([0.0, 0.0, 3.0, 1.0]))
        assert series.valuation == 0
        assert series.top == 1
        assert series.pole_order == 0

    def test_coefficient_beyond_top(self):
        """Below the valuation is zero; above the top is an error."""
        series = LaurentSeries(-1, np.array([1.0, 2.0]))
        assert series.coefficient(-3) == 0.0
        with pytest.raises(ArgumentError, match="truncation order"):
            series.coefficient(1)

    def test_add_keeps_lower_top(self):
        """A sum is known up to the lower top."""
        a = LaurentSeries(-1, np.array([1.0, 1.0, 1.0]))
        b = LaurentSeries(0, np.array([2.0, 2.0]))
        total = series_add(a, b)
        assert total.valuation == -1
        assert total.top == 1
        assert total.coeffs.tolist() == [1.0, 3.0, 3.0]

    def test_mul_by_one_is_identity(self):
        """Multiplying by one changes nothing."""
        a = LaurentSeries(-2, np.array([1.0, -0.5, 0.25, 4.0]))
        one = LaurentSeries(0, np.array([1.0, 0.0, 0.0, 0.0]))
        product = series_mul(a, one)
        assert product.valuation == a.valuation
        assert np.array_equal(product.coeffs, a.coeffs)

    def test_div_then_mul_recovers(self):
        """Dividing then multiplying returns the dividend."""
        a = LaurentSeries(-1, np.array([1.0, 0.3, -0.2, 0.1, 0.05]))
        b = LaurentSeries(-2, np.array([2.0, 1.0, 0.5, 0.25, 0.125]))
        back = series_mul(series_div(a, b), b)
        assert back.valuation == a.valuation
        assert np.allclose(back.coeffs, a.coeffs, atol=1e-14)

    def test_div_by_zero_series(self):
        """Dividing by a zero series raises."""
        a = LaurentSeries(0, np.array([1.0, 1.0]))
        zero = LaurentSeries(0, np.array([0.0]))
        with pytest.raises(SingularSeriesError):
            series_div(a, zero)

    def test_pow_zero_is_one(self):
        """The zeroth power is one."""
        a = LaurentSeries(-1, np.array([1.0, 2.0, 3.0]))
        one = series_pow(a, 0)
        assert one.valuation == 0
        assert one.coeffs[0] == 1.0

    def test_pow_negative_rejected(self):
        """Negative powers are refused."""
        with pytest.raises(ArgumentError):
            series_pow(LaurentSeries(0, np.array([1.0])), -1)

    def test_derivative_lowers_valuation_and_top(self):
        """Differentiation shifts both ends down by one."""
        a = LaurentSeries(-1, np.array([1.0, 5.0, 2.0]))
        d = series_derivative(a)
        assert d.valuation == -2
        assert d.top == a.top - 1
        assert d.coefficient(-2) == -1.0
        assert d.coefficient(0) == 2.0

    def test_power_series_evaluation(self):
        """Power series evaluate in powers of s - 1."""
        series = PowerSeries(np.array([1.0, 2.0, 3.0]))
        assert series(1.5) == pytest.approx(1 + 2 * 0.5 + 3 * 0.25)


class TestStieltjes:
    """Tests for the Stieltjes constants."""

    def test_gamma_zero_is_euler(self):
        """gamma_0 is Euler's constant."""
        assert stieltjes_constants(0)[0] == pytest.approx(GAMMA0, abs=1e-13)

    def test_gamma_one(self):
        """gamma_1 matches its tabulated value."""
        assert stieltjes_constants(1)[1] == pytest.approx(-0.0728158454836767, abs=1e-10)

    def test_against_mpmath(self):
        """gamma_0 through gamma_8 agree with mpmath."""
        gammas = stieltjes_constants(8)
        assert len(gammas) == 9
        for n in range(9):
            assert gammas[n] == pytest.approx(float(mpmath.stieltjes(n)), abs=1e-10)

    @pytest.mark.parametrize("m", [-1, 9])
    def test_index_out_of_range(self, m):
        """Indices outside 0..8 are refused."""
        with pytest.raises(ArgumentError):
            stieltjes_constants(m)


class TestZetaLaurent:
    """Tests for the zeta expansion at s = 1."""

    def test_principal_part(self):
        """zeta has a simple pole with residue 1 and constant gamma_0."""
        series = zeta_laurent(4)
        assert series.pole_order == 1
        assert series.a(1) == 1.0
        assert series.b(0) == pytest.approx(GAMMA0, abs=1e-13)

    def test_evaluates_near_one(self):
        """The truncated series matches zeta at s = 1.2."""
        series = zeta_laurent(8)
        s = 1.2
        assert series(s) == pytest.approx(float(mpmath.zeta(s)), rel=1e-10)


class TestAlphaLaurent:
    """Tests for the expansions of (-1)^k (zeta'/zeta)^k and (-1)^k zeta^(k)/zeta."""

    def test_k1_both_families(self):
        """k = 1 gives 1/(s-1) - gamma_0 for both families."""
        for variant in ("conv", "gen"):
            series = alpha_laurent(1, variant)
            assert series.a(1) == pytest.approx(1.0, abs=1e-14)
            assert series.b(0) == pytest.approx(-GAMMA0, abs=1e-12)

    def test_k2_conv_principal(self):
        """(zeta'/zeta)^2 has principal part 1, -2 gamma_0."""
        series = alpha_laurent(2, "conv")
        assert series.a(2) == pytest.approx(1.0, abs=1e-14)
        assert series.a(1) == pytest.approx(-2 * GAMMA0, abs=1e-12)

    def test_k2_gen_principal(self):
        """zeta''/zeta has principal part 2, -2 gamma_0."""
        series = alpha_laurent(2, "gen")
        assert series.a(2) == pytest.approx(2.0, abs=1e-14)
        assert series.a(1) == pytest.approx(-2 * GAMMA0, abs=1e-12)

    @pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
    def test_pole_order_equals_k(self, k):
        """The pole order is k and the generalized lead is k!."""
        assert alpha_laurent(k, "conv").pole_order == k
        assert alpha_laurent(k, "gen").pole_order == k
        assert alpha_laurent(k, "gen").a(k) == pytest.approx(math.factorial(k), rel=1e-13)

    @pytest.mark.parametrize("k", [1, 2, 3])
    @pytest.mark.parametrize("variant", ["conv", "gen"])
    def test_matches_direct_evaluation(self, k, variant):
        """The series agrees with direct evaluation near s = 1."""
        series = alpha_laurent(k, variant)
        for h in (0.05, -0.05, 0.05j):
            direct = alpha_direct(k, variant, 1 + h)
            assert abs(series(1 + h) - direct) <= 1e-8 * abs(direct)

    def test_invalid_arguments(self):
        """k outside 1..6 and unknown families are refused."""
        with pytest.raises(ArgumentError):
            alpha_laurent(0, "conv")
        with pytest.raises(ArgumentError):
            alpha_laurent(7, "gen")
        with pytest.raises(ArgumentError, match="'conv' or 'gen'"):
            alpha_laurent(2, "lambda")
