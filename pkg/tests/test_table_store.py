"""
Unit tests for the table cache and the compensated accumulators.
"""

import math

import numpy as np
import pytest

from app.config import settings
from app.services.arith_tables import Variant, build_table
from app.services.summation import CompensatedSum, ComplexCompensatedSum, block_sum, two_sum
from app.services.table_store import TableStore


class TestTableStore:
    """Tests for cache hits, rebuilds and housekeeping."""

    def setup_method(self):
        self.variant = Variant.generalized(2)

    def test_second_call_is_cache_hit(self, tmp_path):
        """The second request is served from the cache."""
        store = TableStore(tmp_path)
        first, hit_first = store.get_or_build(self.variant, 5_000)
        second, hit_second = store.get_or_build(self.variant, 5_000)
        assert (hit_first, hit_second) == (False, True)
        assert np.array_equal(first.values, second.values)

    def test_matches_in_process_build(self, tmp_path):
        """A cached table equals a fresh build."""
        store = TableStore(tmp_path)
        store.get_or_build(Variant.conv_power(2), 10_000)
        cached, hit = store.get_or_build(Variant.conv_power(2), 10_000)
        assert hit
        assert np.array_equal(cached.values, build_table(Variant.conv_power(2), 10_000).values)

    def test_corrupt_file_is_rebuilt(self, tmp_path):
        """A truncated file is rebuilt and then hit again."""
        store = TableStore(tmp_path)
        table, _ = store.get_or_build(self.variant, 2_000)
        path = store.path_for(self.variant, 2_000)
        path.write_bytes(path.read_bytes()[:50])
        rebuilt, hit = store.get_or_build(self.variant, 2_000)
        assert not hit
        assert np.array_equal(rebuilt.values, table.values)
        assert store.get_or_build(self.variant, 2_000)[1]

    def test_list_and_stats(self, tmp_path):
        """Listing skips unreadable files and stats add up."""
        store = TableStore(tmp_path)
        store.get_or_build(self.variant, 1_000)
        store.get_or_build(Variant.von_mangoldt(), 1_000)
        (tmp_path / "junk.mtl").write_bytes(b"nope")
        entries = store.list_entries()
        assert {(e["variant"], e["k"]) for e in entries} == {("gen", 2), ("lambda", 0)}
        stats = store.stats()
        assert stats["entries"] == 2
        assert stats["total_bytes"] == sum(e["bytes"] for e in entries)

    def test_delete_and_reset(self, tmp_path):
        """Entries can be deleted one by one or all at once."""
        store = TableStore(tmp_path)
        store.get_or_build(self.variant, 1_000)
        store.get_or_build(Variant.moebius(), 1_000)
        assert store.delete_entry(self.variant, 1_000)
        assert not store.delete_entry(self.variant, 1_000)
        assert store.reset() == 1
        assert store.list_entries() == []

    def test_default_directory_from_settings(self, tmp_path):
        """Without an explicit directory the store uses the configured cache."""
        store = TableStore()
        assert store.cache_dir == tmp_path / "cache"
        assert store.cache_dir.is_dir()
        store.get_or_build(Variant.von_mangoldt(), 500)
        assert (tmp_path / "cache" / "lambda-n500.mtl").exists()
        assert settings.cache_path == store.cache_dir


class TestSummation:
    """Tests for the compensated accumulators."""

    def test_two_sum_is_exact(self):
        """two_sum returns the rounding error exactly."""
        s, t = two_sum(1e16, 1.0)
        assert s == 1e16
        assert t == 1.0

    def test_compensated_recovers_small_terms(self):
        """Small terms survive cancellation."""
        acc = CompensatedSum()
        for value in (1e16, 1.0, -1e16, 1.0):
            acc += value
        assert acc.value == 2.0

    def test_block_chaining_matches_fsum(self):
        """Chained blocks agree with one fsum."""
        rng = np.random.default_rng(1)
        values = rng.normal(size=10_000) * 10.0 ** rng.integers(-8, 8, size=10_000)
        acc = ComplexCompensatedSum()
        for block in np.array_split(values, 13):
            acc.add_block(block, -block)
        expected = math.fsum(values.tolist())
        scale = 1e-15 * float(np.abs(values).sum())
        assert abs(acc.value.real - expected) <= scale
        assert abs(acc.value.imag + expected) <= scale

    def test_empty_block(self):
        """An empty block sums to zero."""
        assert block_sum(np.array([])) == 0.0
