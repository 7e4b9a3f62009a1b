import numpy as np
import pytest

from domainleak import (
    BinEdges,
    BudgetLedger,
    ColumnDomain,
    DataError,
    RandomStream,
    Table,
    decode,
    discretize,
    dp_quantile,
    kmeans_edges,
    privtree_edges,
    quantile_edges,
    uniform_edges,
)
from domainleak.discretizers import DiscretizerConfig, _assemble_edges, build_edges

HIGH_EPS = 1e9


# --------------------------------------------------------------------------
# noiseless oracles


def lloyd_oracle(values, b, dom, iters):
    """Plain 1-D Lloyd with the same init/assignment conventions, no noise."""
    vals = np.clip(values, dom.lo, dom.hi)
    centers = dom.lo + (dom.hi - dom.lo) / b * (np.arange(b) + 0.5)
    counts = np.zeros(b)
    for _ in range(iters):
        order = np.argsort(centers, kind="stable")
        cut = (centers[order][:-1] + centers[order][1:]) / 2
        assign = order[np.searchsorted(cut, vals, side="right")]
        counts = np.bincount(assign, minlength=b).astype(float)
        sums = np.bincount(assign, weights=vals, minlength=b)
        centers = sums / np.maximum(counts, 1.0)
    survivors = np.sort(centers[counts >= 1])
    mids = (survivors[:-1] + survivors[1:]) / 2
    return np.concatenate([[dom.lo], mids[(mids > dom.lo) & (mids < dom.hi)], [dom.hi]])


def privtree_oracle(values, b, dom, max_depth):
    """The same recursion with zero noise (decay term included, it is 0-noise)."""
    vals = np.sort(np.clip(values, dom.lo, dom.hi))
    n = max(vals.size, 1)
    tau = 1.0 / b
    cuts = []

    def visit(a, c, depth):
        left = np.searchsorted(vals, a, side="left")
        right = vals.size if c >= dom.hi else np.searchsorted(vals, c, side="left")
        if (right - left) / n > tau and depth < max_depth:
            mid = (a + c) / 2
            cuts.append(mid)
            visit(a, mid, depth + 1)
            visit(mid, c, depth + 1)

    visit(dom.lo, dom.hi, 0)
    return np.concatenate([[dom.lo], np.sort(cuts), [dom.hi]])


def binning_oracle(value, edges):
    """Linear scan: largest j with edges[j] <= clamp(value), capped at b'-1."""
    v = min(max(value, edges[0]), edges[-1])
    j = 0
    for i in range(len(edges) - 1):
        if edges[i] <= v:
            j = i
    return j


# --------------------------------------------------------------------------


class TestUniform:
    def test_exact_edges(self):
        be = uniform_edges(ColumnDomain(0, 10), 5)
        np.testing.assert_array_equal(be.edges, [0, 2, 4, 6, 8, 10])

    def test_wine_provided_bound_arithmetic(self):
        be = uniform_edges(ColumnDomain(0, 440), 20)
        assert be.nbins == 20
        np.testing.assert_allclose(np.diff(be.edges), 22.0)
        np.testing.assert_allclose(be.edges, np.arange(0, 441, 22))

    def test_data_and_rng_independent(self):
        a = uniform_edges(ColumnDomain(-3, 7), 4)
        b = uniform_edges(ColumnDomain(-3, 7), 4)
        np.testing.assert_array_equal(a.edges, b.edges)

    def test_consumes_no_budget(self):
        led = BudgetLedger()
        t = Table(("x",), np.arange(10.0)[:, None])
        build_edges(t.column(0), ColumnDomain(0, 9), DiscretizerConfig("uniform"), 1.0,
                    RandomStream(0), led)
        assert led.entries == []


class TestDpQuantile:
    def test_argmax_gap_at_high_eps(self):
        values = np.arange(1.0, 101.0)
        dom = ColumnDomain(0.0, 101.0)
        rng = RandomStream(1)
        draws = [dp_quantile(values, 0.5, HIGH_EPS, dom, rng.child(i)) for i in range(2000)]
        inside = [50.0 < v < 51.0 for v in draws]
        assert np.mean(inside) > 0.999

    def test_empty_column_uniform_over_domain(self):
        dom = ColumnDomain(2.0, 4.0)
        rng = RandomStream(2)
        draws = np.array([dp_quantile(np.array([]), 0.5, 1.0, dom, rng.child(i)) for i in range(4000)])
        assert np.all((draws >= 2.0) & (draws <= 4.0))
        assert draws.mean() == pytest.approx(3.0, abs=0.05)

    def test_gap_distribution_matches_enumeration(self):
        values = np.array([1.0, 2.0, 2.5, 4.0, 7.0, 7.5, 8.0, 9.0, 9.5, 9.9])
        dom = ColumnDomain(0.0, 10.0)
        alpha, eps = 0.3, 0.7
        padded = np.concatenate([[dom.lo], np.sort(values), [dom.hi]])
        gaps = np.diff(padded)
        n = values.size
        weights = gaps * np.exp(-eps * np.abs(np.arange(n + 1) - alpha * n) / 2)
        expect = weights / weights.sum()
        rng = RandomStream(3)
        draws = np.array([dp_quantile(values, alpha, eps, dom, rng.child(i)) for i in range(10**5)])
        emp = np.histogram(draws, bins=padded)[0] / draws.size
        assert 0.5 * np.abs(emp - expect).sum() < 0.01

    def test_rejects_bad_eps(self):
        with pytest.raises(DataError):
            dp_quantile(np.ones(3), 0.5, 0.0, ColumnDomain(0, 2), RandomStream(0))


class TestQuantileEdges:
    def test_high_eps_near_exact_quantiles(self):
        values = np.repeat(np.arange(1.0, 101.0), 10)
        dom = ColumnDomain(0.0, 101.0)
        be = quantile_edges(values, 4, HIGH_EPS, dom, RandomStream(4))
        interior = be.edges[1:-1]
        assert len(interior) == 3
        for edge, pct in zip(interior, (25, 50, 75)):
            exact = np.percentile(values, pct)
            assert abs(edge - exact) <= 1.0  # within one data gap

    def test_b2_single_interior_edge(self):
        be = quantile_edges(np.arange(50.0), 2, 1.0, ColumnDomain(0, 50), RandomStream(5))
        assert be.nbins <= 2 and be.edges.size <= 3

    def test_collisions_merge_bins(self):
        be = _assemble_edges(ColumnDomain(0, 10), np.array([5.0, 5.0, 7.0]))
        np.testing.assert_array_equal(be.edges, [0, 5, 7, 10])
        out_of_range = _assemble_edges(ColumnDomain(0, 10), np.array([-3.0, 5.0, 12.0]))
        np.testing.assert_array_equal(out_of_range.edges, [0, 5, 10])

    def test_budget_split_and_unspent(self):
        led = BudgetLedger()
        quantile_edges(np.arange(100.0), 20, 1.0, ColumnDomain(0, 100), RandomStream(6), led)
        spent = [e for e in led.entries if e.spent]
        unspent = [e for e in led.entries if not e.spent]
        assert len(spent) == 19 and len(unspent) == 1
        assert sum(e.eps for e in spent) == pytest.approx(19 / 20, rel=1e-12)
        assert unspent[0].eps == pytest.approx(1 / 20, rel=1e-9)
        total, _ = led.stage_totals("disc")
        assert total == pytest.approx(1.0, rel=1e-12)


class TestKmeansEdges:
    def test_two_cluster_oracle(self):
        values = np.concatenate([np.full(500, 1.0), np.full(500, 9.0)])
        dom = ColumnDomain(0.0, 10.0)
        be = kmeans_edges(values, 2, HIGH_EPS, dom, 5, RandomStream(7))
        assert be.nbins == 2
        assert be.edges[1] == pytest.approx(5.0, abs=0.01)

    def test_identical_values_single_bin(self):
        be = kmeans_edges(np.full(100, 5.0), 2, HIGH_EPS, ColumnDomain(0, 10), 5, RandomStream(8))
        np.testing.assert_array_equal(be.edges, [0.0, 10.0])

    def test_never_more_than_b_bins(self):
        for seed in range(10):
            values = np.random.default_rng(seed).uniform(0, 1, 200)
            be = kmeans_edges(values, 6, 0.5, ColumnDomain(0, 1), 5, RandomStream(seed))
            assert 1 <= be.nbins <= 6

    def test_matches_lloyd_oracle_on_random_data(self):
        for seed in range(20):
            values = np.random.default_rng(seed).normal(5, 2, 300)
            dom = ColumnDomain(0.0, 10.0)
            be = kmeans_edges(values, 5, HIGH_EPS, dom, 5, RandomStream(seed))
            oracle = lloyd_oracle(values, 5, dom, 5)
            assert be.edges.size == oracle.size
            np.testing.assert_allclose(be.edges[1:-1], oracle[1:-1], atol=0.01 * dom.width)

    def test_consumes_full_eps(self):
        led = BudgetLedger()
        kmeans_edges(np.arange(100.0), 4, 0.8, ColumnDomain(0, 100), 5, RandomStream(9), led)
        total, _ = led.stage_totals("disc")
        assert total == pytest.approx(0.8, rel=1e-12)


class TestPrivtreeEdges:
    def test_uniform_grid_four_leaves(self):
        values = (np.arange(1000) + 0.5) / 1000.0
        dom = ColumnDomain(0.0, 1.0)
        be = privtree_edges(values, 4, HIGH_EPS, dom, 20, RandomStream(10))
        np.testing.assert_allclose(be.edges, [0, 0.25, 0.5, 0.75, 1.0])

    def test_concentrated_mass_left_spine(self):
        values = np.random.default_rng(0).uniform(0, 0.01, 1000)
        dom = ColumnDomain(0.0, 1.0)
        max_depth = 12
        be = privtree_edges(values, 4, HIGH_EPS, dom, max_depth, RandomStream(11))
        assert be.nbins <= max_depth + 1
        widths = np.diff(be.edges)
        assert widths.max() / widths.min() > 100  # wildly unequal

    def test_sparse_data_often_single_bin(self):
        # two points at realistic eps: the depth bias and noise dominate and
        # the recursion frequently stops at the root
        single = 0
        for seed in range(20):
            be = privtree_edges(np.array([0.5, 0.6]), 4, 1.0, ColumnDomain(0, 1), 20,
                                RandomStream(seed))
            single += be.nbins == 1
        assert single >= 5
        be = privtree_edges(np.array([0.5, 0.6]), 4, 1.0, ColumnDomain(0, 1), 20,
                            RandomStream(0))
        np.testing.assert_array_equal(be.edges, [0.0, 1.0])

    def test_matches_noiseless_oracle_on_random_data(self):
        for seed in range(20):
            values = np.random.default_rng(seed).beta(2, 5, size=500)
            dom = ColumnDomain(0.0, 1.0)
            be = privtree_edges(values, 8, HIGH_EPS, dom, 20, RandomStream(seed))
            np.testing.assert_allclose(be.edges, privtree_oracle(values, 8, dom, 20))

    def test_exact_mass_grid_hits_b_bound(self):
        # evenly spread mass with power-of-two b fills exactly b equal bins
        values = (np.arange(1024) + 0.5) / 1024.0
        be = privtree_edges(values, 8, HIGH_EPS, ColumnDomain(0, 1), 20, RandomStream(12))
        np.testing.assert_allclose(be.edges, np.arange(9) / 8.0)

    def test_consumes_eps_once(self):
        led = BudgetLedger()
        privtree_edges(np.arange(100.0), 4, 0.3, ColumnDomain(0, 100), 20, RandomStream(13), led)
        assert len(led.entries) == 1
        assert led.entries[0].eps == 0.3


class TestEdgeInvariants:
    def test_all_discretizers_span_domain_exactly(self):
        dom = ColumnDomain(-2.5, 13.5)
        for seed in range(10):
            values = np.random.default_rng(seed).normal(5, 4, 150)
            for kind in ("uniform", "quantile", "kmeans", "privtree"):
                be = build_edges(values, dom, DiscretizerConfig(kind, b=6), 1.0,
                                 RandomStream(seed), None)
                assert be.edges[0] == dom.lo and be.edges[-1] == dom.hi
                assert np.all(np.diff(be.edges) > 0)

    def test_domain_clamp_blinds_out_of_range_values(self):
        # two datasets differing only in how far an outlier exceeds the domain
        dom = ColumnDomain(0.0, 10.0)
        base = np.linspace(0.5, 9.5, 99)
        near = np.concatenate([base, [50.0]])
        far = np.concatenate([base, [1e6]])
        for kind in ("quantile", "kmeans", "privtree"):
            cfg = DiscretizerConfig(kind, b=5)
            a = build_edges(near, dom, cfg, 2.0, RandomStream(14), None)
            b = build_edges(far, dom, cfg, 2.0, RandomStream(14), None)
            np.testing.assert_array_equal(a.edges, b.edges)


class TestDiscretize:
    def test_hi_maps_to_last_bin(self):
        t = Table(("x",), np.array([[10.0]]))
        dt = discretize(t, [BinEdges(np.array([0.0, 5.0, 10.0]))])
        assert dt.values[0, 0] == 1

    def test_below_lo_clamps_to_first_bin(self):
        t = Table(("x",), np.array([[-3.0]]))
        dt = discretize(t, [BinEdges(np.array([0.0, 5.0, 10.0]))])
        assert dt.values[0, 0] == 0

    def test_matches_linear_scan_oracle(self):
        rng = np.random.default_rng(15)
        vals = rng.uniform(-2, 12, size=(200, 1))
        edges = BinEdges(np.array([0.0, 1.0, 3.0, 7.0, 10.0]))
        t = Table(("x",), vals)
        dt = discretize(t, [edges])
        for v, got in zip(vals[:, 0], dt.values[:, 0]):
            assert got == binning_oracle(v, edges.edges.tolist())


class TestDecode:
    def test_values_within_bins(self):
        dt_vals = np.array([[0], [1], [1]])
        edges = [BinEdges(np.array([2.0, 4.0, 8.0]))]
        from domainleak import DiscreteTable

        dt = DiscreteTable(("x",), dt_vals, (2,))
        out = decode(dt, edges, RandomStream(16))
        assert 2.0 <= out.values[0, 0] < 4.0
        assert np.all((out.values[1:, 0] >= 4.0) & (out.values[1:, 0] < 8.0))

    def test_containment(self):
        from domainleak import DiscreteTable

        rng = np.random.default_rng(17)
        dt = DiscreteTable(("x",), rng.integers(0, 4, size=(500, 1)), (4,))
        edges = [BinEdges(np.array([0.0, 1.0, 2.0, 3.0, 4.0]))]
        out = decode(dt, edges, RandomStream(18))
        assert out.values.min() >= 0.0 and out.values.max() <= 4.0

    def test_single_bin_mean_is_midpoint(self):
        from domainleak import DiscreteTable

        dt = DiscreteTable(("x",), np.zeros((10**5, 1), dtype=int), (1,))
        edges = [BinEdges(np.array([2.0, 6.0]))]
        out = decode(dt, edges, RandomStream(19))
        assert out.values.mean() == pytest.approx(4.0, rel=0.01)

    def test_round_trip_indices(self):
        t = Table(("x",), np.random.default_rng(20).uniform(0, 10, size=(300, 1)))
        edges = [uniform_edges(ColumnDomain(0, 10), 10)]
        dt = discretize(t, edges)
        back = discretize(decode(dt, edges, RandomStream(21)), edges)
        np.testing.assert_array_equal(back.values, dt.values)
