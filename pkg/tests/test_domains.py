import numpy as np
import pytest

from domainleak import (
    BudgetLedger,
    DataError,
    DomainExtractionError,
    ExtractionConfig,
    RandomStream,
    direct_domain,
    dp_domain,
    dp_domain_column,
    provided_domain,
)
from domainleak.domains import histogram_grid

from conftest import random_table

HIGH_EPS = 1e9
CFG = ExtractionConfig()


def zero_noise_bounds(values, m=32):
    """Oracle: lowest/highest non-empty bin edges on the fixed grid."""
    edges = histogram_grid(m)
    vals = np.clip(values, edges[0], edges[-1])
    idx = np.clip(np.searchsorted(edges, vals, side="right") - 1, 0, edges.size - 2)
    nonzero = np.unique(idx)
    return float(edges[nonzero[0]]), float(edges[nonzero[-1] + 1])


class TestGrid:
    def test_shape(self):
        g = histogram_grid(32)
        assert g.size == 2 * 32 + 3  # 2m+2 bins
        assert g[0] == -(2.0**32) and g[-1] == 2.0**32
        assert np.all(np.diff(g) > 0)

    def test_unit_bins_around_zero(self):
        g = histogram_grid(4)
        np.testing.assert_array_equal(g, [-16, -8, -4, -2, -1, 0, 1, 2, 4, 8, 16])


class TestProvidedDomain:
    def test_simple(self):
        d = provided_domain([(0.0, 1.0)])
        assert d.provenance == "provided"
        assert (d.bounds[0].lo, d.bounds[0].hi) == (0.0, 1.0)

    def test_wine_full_range_shared_by_worlds(self, wine_table, wine_key_columns):
        free, total = wine_key_columns
        spec = [
            (wine_table.column(c).min(), wine_table.column(c).max())
            for c in range(wine_table.d)
        ]
        d = provided_domain(spec)
        assert d.bounds[free].hi == 289.0
        assert d.bounds[total].hi == 440.0

    def test_empty_spec_error(self):
        with pytest.raises(DataError):
            provided_domain([])

    def test_bad_bounds_error(self):
        with pytest.raises(DataError):
            provided_domain([(1.0, 1.0)])


class TestDirectDomain:
    def test_wine_with_and_without_target(self, wine_table, wine_key_columns):
        free, total = wine_key_columns
        with_target = direct_domain(wine_table)
        assert (with_target.bounds[free].hi, with_target.bounds[total].hi) == (289.0, 440.0)
        target = int(np.argmax(wine_table.column(free)))
        without = direct_domain(wine_table.drop_row(target))
        assert (without.bounds[free].hi, without.bounds[total].hi) == (146.5, 366.5)

    def test_leak_sentinel_recorded(self, wine_table):
        led = BudgetLedger()
        direct_domain(wine_table, led)
        assert led.has_leak

    def test_single_row_widened(self):
        from domainleak import Table

        t = Table(("a",), np.array([[3.0]]))
        d = direct_domain(t)
        assert d.bounds[0].lo == 3.0 and d.bounds[0].hi > 3.0

    def test_depends_on_record_iff_extremal(self, wine_table):
        base = direct_domain(wine_table)
        # dropping a strictly interior record leaves every bound unchanged
        interior = next(
            i for i in range(wine_table.n)
            if all(
                b.lo < wine_table.values[i, c] < b.hi
                for c, b in enumerate(base.bounds)
            )
        )
        assert direct_domain(wine_table.drop_row(interior)).bounds == base.bounds
        # dropping the outlier target moves the bounds
        target = int(np.argmax(wine_table.column(5)))
        assert direct_domain(wine_table.drop_row(target)).bounds != base.bounds


class TestDpDomainColumn:
    def test_zero_noise_oracle_spread_values(self):
        rng = np.random.default_rng(0)
        values = np.concatenate([[3.0, 900.0], rng.uniform(3, 900, 100)])
        dom = dp_domain_column(values, HIGH_EPS, CFG, RandomStream(1))
        assert (dom.lo, dom.hi) == (2.0, 1024.0)

    def test_all_zero_values(self):
        dom = dp_domain_column(np.zeros(50), HIGH_EPS, CFG, RandomStream(2))
        assert (dom.lo, dom.hi) == (0.0, 1.0)

    def test_wine_key_column_snaps_to_powers_of_two(self, wine_table, wine_key_columns):
        free, _ = wine_key_columns
        col = wine_table.column(free)
        with_target = dp_domain_column(col, HIGH_EPS, CFG, RandomStream(3))
        assert with_target.hi == 512.0
        target = int(np.argmax(col))
        rest = np.delete(col, target)
        without = dp_domain_column(rest, HIGH_EPS, CFG, RandomStream(4))
        assert without.hi == 256.0  # the raw max 146.5 never appears

    def test_matches_zero_noise_oracle_on_random_data(self):
        for seed in range(50):
            data_rng = np.random.default_rng(seed)
            scale = 10 ** data_rng.uniform(-2, 4)
            values = data_rng.normal(data_rng.uniform(-5, 5) * scale, scale, size=200)
            dom = dp_domain_column(values, HIGH_EPS, CFG, RandomStream(seed))
            assert (dom.lo, dom.hi) == zero_noise_bounds(values)

    def test_encloses_true_range_and_on_grid(self):
        grid = set(histogram_grid(32).tolist())
        for seed in range(50):
            data_rng = np.random.default_rng(1000 + seed)
            values = data_rng.uniform(-100, 100, size=data_rng.integers(2, 500))
            dom = dp_domain_column(values, HIGH_EPS, CFG, RandomStream(seed))
            assert dom.lo <= values.min() and values.max() <= dom.hi
            assert dom.lo in grid and dom.hi in grid

    def test_charges_eps(self):
        led = BudgetLedger()
        dp_domain_column(np.ones(10), 0.5, CFG, RandomStream(5), led)
        eps, _ = led.stage_totals("extract")
        assert eps == 0.5

    def test_failure_on_empty_data(self):
        with pytest.raises(DomainExtractionError):
            dp_domain_column(np.array([]), HIGH_EPS, CFG, RandomStream(6))

    def test_rejects_bad_eps(self):
        with pytest.raises(DataError):
            dp_domain_column(np.ones(5), 0.0, CFG, RandomStream(0))


class TestDpDomain:
    def test_even_split_across_columns(self, wine_table):
        led = BudgetLedger()
        dom = dp_domain(wine_table, 0.5, CFG, RandomStream(7), led)
        assert dom.provenance == "dp"
        entries = [e for e in led.entries if e.stage == "extract"]
        assert len(entries) == wine_table.d
        assert all(e.eps == pytest.approx(0.5 / 11) for e in entries)
        total, _ = led.stage_totals("extract")
        assert total == pytest.approx(0.5, rel=1e-12)

    def test_single_column_uses_full_eps(self):
        t = random_table(0, n=30, d=1)
        led = BudgetLedger()
        dp_domain(t, 0.7, CFG, RandomStream(8), led)
        assert led.entries[0].eps == 0.7

    def test_deterministic_under_seed(self, wine_table):
        a = dp_domain(wine_table, 1.0, CFG, RandomStream(9))
        b = dp_domain(wine_table, 1.0, CFG, RandomStream(9))
        assert a == b

    def test_fallback_to_full_grid(self, monkeypatch, caplog):
        from domainleak import Table, domains

        def always_fails(*args, **kwargs):
            raise DomainExtractionError("no bin qualified")

        monkeypatch.setattr(domains, "dp_domain_column", always_fails)
        t = Table(("a",), np.array([[5.0], [6.0]]))
        cfg = ExtractionConfig(m=8)
        with caplog.at_level("WARNING"):
            dom = dp_domain(t, 1.0, cfg, RandomStream(11))
        assert (dom.bounds[0].lo, dom.bounds[0].hi) == (-256.0, 256.0)
        assert "extraction failed" in caplog.text


class TestLeakGeometry:
    """The mechanism the attack rides on: direct bounds move with the target,
    DP bounds only move once a lone record's bin is detectable."""

    def test_dp_bounds_identical_at_low_eps(self, wine_table, wine_key_columns):
        free, _ = wine_key_columns
        col = wine_table.column(free)
        rest = np.delete(col, int(np.argmax(col)))
        eps = 0.5 / 11  # the per-column share of eps_pre = 1
        for seed in range(10):
            a = dp_domain_column(col, eps, CFG, RandomStream(seed).child("x"))
            b = dp_domain_column(rest, eps, CFG, RandomStream(seed).child("x"))
            assert a == b  # same seed, one record apart: bounds identical

    def test_dp_bounds_separate_at_extreme_eps(self, wine_table, wine_key_columns):
        free, _ = wine_key_columns
        col = wine_table.column(free)
        rest = np.delete(col, int(np.argmax(col)))
        eps = 500.0 / 11
        a = dp_domain_column(col, eps, CFG, RandomStream(1).child("x"))
        b = dp_domain_column(rest, eps, CFG, RandomStream(1).child("x"))
        assert a.hi == 512.0 and b.hi == 256.0
