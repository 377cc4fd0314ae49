"""
Unit tests for arithmetic tables, convolution and the cache format.
"""

import math

import numpy as np
import pytest

from app.config import settings
from app.exceptions import ArgumentError, ResourceBudgetError, TableFormatError
from app.services.arith_tables import (
    ArithTable,
    Variant,
    VariantKind,
    build_table,
    check_von_mangoldt_bounds,
    dirichlet_convolve,
    divisors,
    factorize,
    lambda_conv_power,
    lambda_generalized,
    lambda_generalized_oracle,
    load_table,
    naive_convolution_power_oracle,
    natural_log_table,
    omega_table,
    read_header,
    save_table,
    sieve_moebius,
    sieve_tables,
    sieve_von_mangoldt,
)

LOG2, LOG3 = math.log(2), math.log(3)


class TestVariant:
    """Tests for the variant tag."""

    def test_parse_families(self):
        """CLI names map to the matching variant; k is ignored outside conv and gen."""
        assert Variant.parse("gen", 2) == Variant.generalized(2)
        assert Variant.parse("conv", 3).slug == "conv-k3"
        assert Variant.parse("lambda", 5) == Variant.von_mangoldt()

    @pytest.mark.parametrize("name", ["lambda", "mu", "log", "conv", "gen"])
    def test_k_zero_rejected(self, name):
        """k = 0 is an argument error for every variant name."""
        with pytest.raises(ArgumentError, match="k >= 1"):
            Variant.parse(name, 0)

    def test_unknown_name(self):
        """An unrecognised variant name is rejected."""
        with pytest.raises(ArgumentError, match="unknown variant"):
            Variant.parse("sigma")


class TestSieve:
    """Tests for the von Mangoldt and Moebius sieve."""

    def test_von_mangoldt_small_values(self, small_tables):
        """Lambda is log p on prime powers and 0 elsewhere."""
        lam, _ = small_tables
        assert lam[1] == 0.0
        assert lam[2] == pytest.approx(LOG2, abs=1e-15)
        assert lam[4] == pytest.approx(LOG2, abs=1e-15)
        assert lam[6] == 0.0
        assert lam[27] == pytest.approx(LOG3, abs=1e-15)
        assert lam[9973] == pytest.approx(math.log(9973), abs=1e-15)

    def test_moebius_small_values(self, small_tables):
        """mu matches its values on small squarefree and non-squarefree n."""
        _, mu = small_tables
        assert [mu[n] for n in (1, 2, 4, 6, 12, 30)] == [1, -1, 0, 1, 0, -1]

    def test_slot_zero_and_length(self, small_tables):
        """Slot 0 is padding and len() reports n_max."""
        lam, _ = small_tables
        assert lam.values[0] == 0.0
        assert len(lam) == 10_000

    def test_chebyshev_psi_100(self, small_tables):
        """psi(100) agrees with the tabulated value."""
        lam, _ = small_tables
        assert math.fsum(lam.values[:101].tolist()) == pytest.approx(94.0453, abs=1e-4)

    def test_psi_10_hand_sum(self, small_tables):
        """psi(10) equals the seven-term hand sum."""
        lam, _ = small_tables
        expected = 3 * LOG2 + 2 * LOG3 + math.log(5) + math.log(7)
        assert math.fsum(lam.values[:11].tolist()) == pytest.approx(expected, rel=1e-15)

    def test_n_max_one(self):
        """A table of size one holds Lambda(1) = 0 and mu(1) = 1."""
        lam, mu = sieve_tables(1)
        assert lam[1] == 0.0
        assert mu[1] == 1.0

    def test_n_max_zero_rejected(self):
        """n_max = 0 is rejected."""
        with pytest.raises(ArgumentError):
            sieve_von_mangoldt(0)

    def test_segmented_matches_single_pass(self, monkeypatch, small_tables):
        """The threaded segmented sieve reproduces the single pass bit for bit."""
        lam, mu = small_tables
        monkeypatch.setattr(settings, "segment_threshold", 1_000)
        monkeypatch.setattr(settings, "segment_size", 777)
        seg_lam, seg_mu = sieve_tables(10_000, workers=3)
        assert np.array_equal(seg_lam.values, lam.values)
        assert np.array_equal(seg_mu.values, mu.values)

    def test_moebius_sums_to_zero_over_divisors(self):
        """sum of mu(d) over d | n vanishes for n > 1."""
        mu = sieve_moebius(500)
        for n in (6, 12, 30, 64, 210, 360):
            assert sum(mu[d] for d in divisors(n)) == 0

    def test_budget_exceeded(self, monkeypatch):
        """Allocations over the memory budget raise and name the setting."""
        monkeypatch.setattr(settings, "memory_budget_mb", 1)
        with pytest.raises(ResourceBudgetError, match="MTL_MEMORY_BUDGET_MB"):
            sieve_von_mangoldt(1_000_000)


class TestConvolution:
    """Tests for Dirichlet convolution and the Lambda families."""

    def test_lambda_star_lambda_at_12(self, small_tables):
        """(Lambda * Lambda)(12) = 2 log 2 log 3."""
        lam, _ = small_tables
        conv = dirichlet_convolve(lam, lam)
        assert conv[12] == pytest.approx(2 * LOG2 * LOG3, rel=1e-14)
        assert conv[12] == pytest.approx(1.5230, abs=1e-4)

    def test_moebius_star_log_is_lambda(self, small_tables):
        """mu * log reproduces Lambda."""
        lam, mu = small_tables
        result = dirichlet_convolve(mu, natural_log_table(10_000))
        assert np.allclose(result.values, lam.values, atol=1e-12)

    def test_size_mismatch(self, small_tables):
        """Tables of different sizes cannot be convolved."""
        lam, _ = small_tables
        with pytest.raises(ArgumentError, match="different sizes"):
            dirichlet_convolve(lam, sieve_von_mangoldt(100))

    def test_conv_power_one_is_lambda(self, small_tables):
        """Lambda^1 is Lambda itself."""
        lam, _ = small_tables
        table = lambda_conv_power(1, 10_000, von_mangoldt=lam)
        assert np.array_equal(table.values, lam.values)
        assert table.variant == Variant.conv_power(1)

    def test_conv_power_matches_naive_oracle(self):
        """Fast Lambda^k agrees with the divisor-pair oracle for k = 2, 3."""
        lam = sieve_von_mangoldt(1_000)
        for k in (2, 3):
            table = lambda_conv_power(k, 1_000, von_mangoldt=lam)
            for n in range(2, 1_001):
                oracle = naive_convolution_power_oracle(k, n)
                assert abs(table[n] - oracle) <= 1e-9 * max(abs(oracle), math.log(n) ** k)

    def test_generalized_matches_oracle(self, small_tables):
        """Lambda_k agrees with the squarefree-divisor oracle for k <= 4."""
        lam, _ = small_tables
        for k in (1, 2, 3, 4):
            table = lambda_generalized(k, 10_000, von_mangoldt=lam)
            for n in range(2, 10_001, 7):
                oracle = lambda_generalized_oracle(k, n)
                assert abs(table[n] - oracle) <= 1e-9 * max(abs(oracle), math.log(n) ** k)

    def test_generalized_two_at_prime_square(self, small_tables):
        """Lambda_2 at 4 and 6 matches the hand values."""
        lam, _ = small_tables
        table = lambda_generalized(2, 10_000, von_mangoldt=lam)
        assert table[4] == pytest.approx(3 * LOG2**2, rel=1e-13)
        assert table[6] == pytest.approx(2 * LOG2 * LOG3, rel=1e-13)

    @pytest.mark.parametrize("k", [2, 3])
    def test_generalized_support(self, small_tables, k):
        """Lambda_k vanishes exactly where n has more than k distinct prime factors."""
        lam, _ = small_tables
        omega = omega_table(10_000)
        table = lambda_generalized(k, 10_000, von_mangoldt=lam)
        outside = np.flatnonzero(omega > k)
        assert outside.size > 0
        assert np.all(table.values[outside] == 0.0)

    def test_build_table_dispatch(self):
        """build_table dispatches on the variant kind."""
        table = build_table(Variant.generalized(2), 200)
        assert table.variant.kind is VariantKind.GENERALIZED
        assert build_table(Variant.natural_log(), 10)[10] == pytest.approx(math.log(10))


class TestConvolutionAlgebra:
    """Tests for commutativity and associativity on random tables."""

    def setup_method(self):
        rng = np.random.default_rng(17)
        self.tables = []
        for label in ("f", "g", "h"):
            values = rng.normal(size=201)
            values[0] = 0.0
            self.tables.append(ArithTable(Variant(VariantKind.DERIVED, label=label), 200, values))

    def test_commutative(self):
        """f * g equals g * f."""
        f, g, _ = self.tables
        left = dirichlet_convolve(f, g).values
        right = dirichlet_convolve(g, f).values
        assert np.max(np.abs(left - right)) <= 1e-12 * np.max(np.abs(left))

    def test_associative(self):
        """(f * g) * h equals f * (g * h)."""
        f, g, h = self.tables
        left = dirichlet_convolve(dirichlet_convolve(f, g), h).values
        right = dirichlet_convolve(f, dirichlet_convolve(g, h)).values
        assert np.max(np.abs(left - right)) <= 1e-12 * np.max(np.abs(left))

    def test_unit_is_identity(self):
        """Convolving with the indicator of 1 returns the table unchanged."""
        f = self.tables[0]
        unit = np.zeros(201)
        unit[1] = 1.0
        one = ArithTable(Variant(VariantKind.DERIVED, label="one"), 200, unit)
        assert np.array_equal(dirichlet_convolve(f, one).values, f.values)


class TestBounds:
    """Tests for 0 <= Lambda^k <= Lambda_k <= (log n)^k."""

    @pytest.mark.parametrize("k", [1, 2, 3])
    def test_bounds_hold(self, k):
        """0 <= Lambda^k <= Lambda_k <= (log n)^k over the whole table."""
        report = check_von_mangoldt_bounds(k, 20_000)
        assert report.passed
        assert report.lower >= 0.0

    def test_k_one_is_tight_in_the_middle(self):
        """For k = 1 the middle inequality is an equality."""
        report = check_von_mangoldt_bounds(1, 1_000)
        assert report.middle == pytest.approx(0.0, abs=1e-9)


class TestOracles:
    """Tests for the trial-division helpers."""

    def test_factorize(self):
        """Trial division returns the prime-exponent map."""
        assert factorize(360) == {2: 3, 3: 2, 5: 1}
        assert factorize(97) == {97: 1}

    def test_divisors(self):
        """Divisors come back sorted."""
        assert divisors(12) == [1, 2, 3, 4, 6, 12]

    def test_generalized_oracle_rejects_k_zero(self):
        """The oracle refuses k = 0."""
        with pytest.raises(ArgumentError):
            lambda_generalized_oracle(0, 10)


class TestPersistence:
    """Tests for the binary cache format."""

    def setup_method(self):
        self.table = lambda_conv_power(2, 10_000)

    def test_round_trip_is_bit_exact(self, tmp_path):
        """Save then load returns the identical table and header."""
        path = save_table(self.table, tmp_path / "conv.mtl")
        loaded = load_table(path)
        assert loaded.variant == self.table.variant
        assert np.array_equal(loaded.values, self.table.values)
        assert read_header(path) == (Variant.conv_power(2), 10_000)

    def test_truncated_file(self, tmp_path):
        """A truncated payload is reported as a length error."""
        path = save_table(self.table, tmp_path / "conv.mtl")
        path.write_bytes(path.read_bytes()[:-9])
        with pytest.raises(TableFormatError, match="length"):
            load_table(path)

    def test_flipped_byte(self, tmp_path):
        """A corrupted payload byte fails the checksum."""
        path = save_table(self.table, tmp_path / "conv.mtl")
        raw = bytearray(path.read_bytes())
        raw[100] ^= 0xFF
        path.write_bytes(bytes(raw))
        with pytest.raises(TableFormatError, match="checksum"):
            load_table(path)

    def test_bad_magic(self, tmp_path):
        """A wrong magic prefix is rejected."""
        path = save_table(self.table, tmp_path / "conv.mtl")
        raw = bytearray(path.read_bytes())
        raw[:4] = b"XXXX"
        path.write_bytes(bytes(raw))
        with pytest.raises(TableFormatError, match="magic"):
            load_table(path)

    def test_derived_not_persistable(self, tmp_path, small_tables):
        """Derived convolutions have no on-disk tag."""
        lam, mu = small_tables
        derived = dirichlet_convolve(lam, mu)
        with pytest.raises(ArgumentError, match="not persistable"):
            save_table(derived, tmp_path / "derived.mtl")

    def test_table_is_read_only(self):
        """Table values cannot be mutated."""
        with pytest.raises(ValueError):
            self.table.values[5] = 1.0

    def test_index_out_of_range(self):
        """Indexing outside 1..n_max raises IndexError."""
        with pytest.raises(IndexError):
            self.table[0]
        assert isinstance(self.table, ArithTable)
