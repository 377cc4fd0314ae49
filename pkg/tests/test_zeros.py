"""
Unit tests for zero-table loading and the zero-sum audits.
"""

import math

import numpy as np
import pytest

from app.exceptions import ArgumentError, DomainError, ZeroTableError
from app.services.zeros import (
    ZeroTable,
    b_spread,
    completion_height,
    implied_power_sum,
    load_zeros,
    smoothed_count,
    zero_free_part,
    zero_sum_linear,
    zero_sum_power,
    zero_sum_power_audit,
)

AUDIT_POINTS = (2, 2.5, 3, 2 + 10j, 2 + 20j)


class TestLoadZeros:
    """Tests for the ordinate file format."""

    def test_three_lines(self, tmp_path):
        """One ordinate per line."""
        path = tmp_path / "z.txt"
        path.write_text("14.134725\n21.022040\n25.010858\n")
        table = load_zeros(path)
        assert table.count == 3
        assert table.ordinates[0] == 14.134725

    def test_comments_and_blank_lines(self, tmp_path):
        """Comments and blank lines are skipped."""
        path = tmp_path / "z.txt"
        path.write_text("# header\n\n14.134725\n# mid\n21.022040\n")
        assert load_zeros(path).count == 2

    def test_empty_file(self, tmp_path):
        """An empty file holds no zeros."""
        path = tmp_path / "z.txt"
        path.write_text("")
        assert load_zeros(path).count == 0

    def test_descending_pair(self, tmp_path):
        """A descending pair names the offending line."""
        path = tmp_path / "z.txt"
        path.write_text("21.022040\n14.134725\n")
        with pytest.raises(ZeroTableError, match="line 2"):
            load_zeros(path)

    def test_non_numeric(self, tmp_path):
        """A non-numeric line names its line number."""
        path = tmp_path / "z.txt"
        path.write_text("# c\n14.134725\nabc\n")
        with pytest.raises(ZeroTableError, match="line 3"):
            load_zeros(path)

    def test_first_ordinate_too_low(self, tmp_path):
        """The first ordinate must exceed 14."""
        path = tmp_path / "z.txt"
        path.write_text("13.5\n21.0\n")
        with pytest.raises(ZeroTableError, match="not above 14"):
            load_zeros(path)

    def test_generated_file(self, zeros_100):
        """The generated fixture starts at the first zero."""
        assert zeros_100.count == 100
        assert zeros_100.ordinates[0] == pytest.approx(14.134725141734693, abs=1e-12)


class TestSmoothedDensity:
    """Tests for the smoothed zero count."""

    def test_count_matches_table(self, zeros_200):
        """N(T) at the last ordinate is close to the zero count."""
        assert smoothed_count(zeros_200.ordinates[-1]) == pytest.approx(200, abs=2)

    def test_completion_height(self):
        """The completion height sits halfway to the next zero."""
        height = completion_height(100)
        assert smoothed_count(height) == pytest.approx(100.5, abs=1e-9)


class TestZeroSumLinear:
    """Tests for the partial-fraction audit."""

    def test_b_spread_with_100_zeros(self, zeros_100):
        """B estimates at the audit points agree within 0.05."""
        results = [zero_sum_linear(zeros_100, s) for s in AUDIT_POINTS]
        assert b_spread(results) <= 0.05

    def test_b_estimate_near_constant(self, zeros_200):
        """The estimate at s = 2 is close to the known B."""
        # B = log(4 pi) / 2 - 1 - gamma_0 / 2
        expected = 0.5 * math.log(4 * math.pi) - 1 - np.euler_gamma / 2
        assert expected == pytest.approx(-0.0230957, abs=1e-7)
        assert zero_sum_linear(zeros_200, 2.0).b_estimate.real == pytest.approx(expected, abs=0.01)

    def test_s2_vs_s3(self, zeros_100):
        """Real points 2 and 3 give close estimates."""
        b2 = zero_sum_linear(zeros_100, 2.0).b_estimate
        b3 = zero_sum_linear(zeros_100, 3.0).b_estimate
        assert abs(b2 - b3) <= 0.05

    def test_doubling_moves_within_tail(self, zeros_100, zeros_200):
        """Doubling the zero count moves B by less than the tail bound."""
        for s in AUDIT_POINTS:
            coarse = zero_sum_linear(zeros_100, s)
            fine = zero_sum_linear(zeros_200, s)
            assert abs(fine.b_estimate - coarse.b_estimate) <= coarse.tail
            assert fine.tail < coarse.tail

    def test_conjugate_symmetry(self, zeros_100):
        """Conjugating s conjugates the zero sum."""
        s = 2 + 10j
        assert zero_sum_linear(zeros_100, s.conjugate()).sum == pytest.approx(
            zero_sum_linear(zeros_100, s).sum.conjugate(), rel=1e-12
        )

    def test_empty_table(self):
        """No zeros leaves only the zero-free part."""
        empty = ZeroTable(np.array([]))
        result = zero_sum_linear(empty, 2.0)
        assert result.sum == 0j
        assert result.b_estimate == pytest.approx(zero_free_part(2.0))

    def test_too_few_zeros(self, zeros_100):
        """Fewer than 50 zeros is refused."""
        with pytest.raises(DomainError, match="at least 50"):
            zero_sum_linear(zeros_100.head(10), 2.0)

    @pytest.mark.parametrize("s", [1.2, 4.5 + 1j])
    def test_window(self, zeros_100, s):
        """Points outside the audit window are refused."""
        with pytest.raises(DomainError):
            zero_sum_linear(zeros_100, s)

    def test_spread_needs_results(self):
        """An empty result list has no spread."""
        with pytest.raises(ArgumentError):
            b_spread([])


class TestZeroSumPower:
    """Tests for the truncated sums of (s - rho)^-k."""

    def test_prefix_cauchy(self, zeros_100):
        """Adding zeros moves the sum by at most the dropped terms and the tail."""
        first = zero_sum_power(zeros_100.head(50), 2, 2.0)
        second = zero_sum_power(zeros_100, 2, 2.0)
        bound = 4 * math.fsum((zeros_100.ordinates[50:] ** -2).tolist()) + second.tail
        assert abs(second.value - first.value) <= bound

    def test_empty_table(self):
        """No zeros leaves only the zero-free part."""
        assert zero_sum_power(ZeroTable(np.array([])), 2, 2.0).value == 0j

    def test_conjugate(self, zeros_100):
        """Conjugating s conjugates the power sum."""
        s = 1.5 + 4j
        assert zero_sum_power(zeros_100, 2, s.conjugate()).value == pytest.approx(
            zero_sum_power(zeros_100, 2, s).value.conjugate(), rel=1e-12
        )

    def test_real_at_real_point(self, zeros_100):
        """The power sum is real at a real point."""
        value = zero_sum_power(zeros_100, 3, 2.0).value
        assert abs(value.imag) <= 1e-14

    @pytest.mark.parametrize("k,s", [(2, 2.0), (2, 1.5 + 5j), (3, 2.0)])
    def test_audit_within_tail(self, zeros_200, k, s):
        """The truncated sum matches the implied value within its tail."""
        audit = zero_sum_power_audit(zeros_200, k, s)
        assert audit.passed
        assert audit.defect < 0.05

    def test_implied_is_conjugate_symmetric(self):
        """The implied sum is conjugate symmetric."""
        s = 1.8 + 3j
        assert implied_power_sum(2, s.conjugate()) == pytest.approx(
            implied_power_sum(2, s).conjugate(), rel=1e-10
        )

    def test_invalid(self, zeros_100):
        """k < 2 and points off the window are refused."""
        with pytest.raises(ArgumentError):
            zero_sum_power(zeros_100, 1, 2.0)
        with pytest.raises(DomainError):
            zero_sum_power(zeros_100, 2, 3.0)
