"""Four DP binning strategies plus encode/decode between continuous and binned data.

All strategies take (values, domain, eps, bin budget) and return BinEdges
whose first and last edges equal the domain bounds exactly. The domain, not
the raw data range, bounds every edge: inputs are clamped into the domain
before any count or sum is formed. That clamp is what lets a
provided/DP-extracted domain protect out-of-range records.

Budget per column: uniform consumes nothing, quantile consumes (b-1)*(eps/b)
and returns the leftover eps/b to the ledger unspent, k-means and PrivTree
consume eps in full.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mechanisms import BudgetLedger, RandomStream, laplace, two_sided_geometric
from .tabular import BinEdges, ColumnDomain, DataError, DiscreteTable, Table

logger = logging.getLogger(__name__)

DISCRETIZER_KINDS = ("uniform", "quantile", "kmeans", "privtree")


@dataclass(frozen=True)
class DiscretizerConfig:
    kind: str = "uniform"
    b: int = 20
    kmeans_iters: int = 5
    privtree_max_depth: int = 20

    def __post_init__(self):
        if self.kind not in DISCRETIZER_KINDS:
            raise DataError(f"unknown discretizer {self.kind!r}")
        if self.b < 2:
            raise DataError("bin budget b must be >= 2")
        if self.kmeans_iters < 1 or self.privtree_max_depth < 1:
            raise DataError("iteration/depth limits must be >= 1")


def uniform_edges(dom: ColumnDomain, b: int) -> BinEdges:
    """b equal-width bins spanning the domain; data-independent, zero budget."""
    return BinEdges(np.linspace(dom.lo, dom.hi, b + 1))


def _assemble_edges(dom: ColumnDomain, interior: np.ndarray) -> BinEdges:
    """[lo, sorted unique interior cuts strictly inside (lo, hi), hi].

    Collisions and out-of-range cuts are silently merged/dropped, so a
    requested b can come back as b' < b bins; callers accept fewer bins the
    same way k-means accepts empty clusters.
    """
    interior = np.asarray(interior, dtype=np.float64)
    interior = interior[(interior > dom.lo) & (interior < dom.hi)]
    interior = np.unique(interior)
    return BinEdges(np.concatenate([[dom.lo], interior, [dom.hi]]))


def _gap_weights(values: np.ndarray, dom: ColumnDomain):
    """Sorted clamped values padded with the domain sentinels plus log gap
    widths; shared by every quantile drawn from the same column."""
    x = np.sort(np.clip(np.asarray(values, dtype=np.float64), dom.lo, dom.hi))
    padded = np.concatenate([[dom.lo], x, [dom.hi]])
    with np.errstate(divide="ignore"):
        log_gaps = np.log(np.diff(padded))
    return padded, log_gaps


def _sample_gap(padded, log_gaps, alpha: float, eps: float, rng: RandomStream) -> float:
    n = padded.size - 2
    log_w = log_gaps - eps * np.abs(np.arange(n + 1) - alpha * n) / 2.0
    log_w -= log_w.max()
    w = np.exp(log_w)
    probs = w / w.sum()
    u = rng.gen.uniform()
    i = int(np.searchsorted(np.cumsum(probs), u, side="right").clip(0, n))
    return float(rng.gen.uniform(padded[i], padded[i + 1]))


def dp_quantile(
    values: np.ndarray,
    alpha: float,
    eps: float,
    dom: ColumnDomain,
    rng: RandomStream,
) -> float:
    """One DP quantile by sampling a gap between consecutive sorted values.

    Gap i between x_i and x_{i+1} (with sentinels x_0 = lo, x_{n+1} = hi)
    is drawn with weight (x_{i+1} - x_i) * exp(-eps * |i - alpha*n| / 2);
    the returned value is uniform within the chosen gap. The /2 is the
    exponential-mechanism normalization for the sensitivity-1 rank utility.
    Zero-width gaps get zero probability.
    """
    if eps <= 0:
        raise DataError(f"dp_quantile needs eps > 0, got {eps}")
    if not 0 < alpha < 1:
        raise DataError(f"alpha must lie in (0, 1), got {alpha}")
    padded, log_gaps = _gap_weights(values, dom)
    return _sample_gap(padded, log_gaps, alpha, eps, rng)


def quantile_edges(
    values: np.ndarray,
    b: int,
    eps: float,
    dom: ColumnDomain,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
) -> BinEdges:
    """Approximately mass-balanced bins: interior cut j is the DP j/b quantile.

    The budget is split as eps/b per quantile; with b-1 interior cuts that
    leaves eps/b unspent, which is recorded in the ledger as returned.
    """
    eps_q = eps / b
    padded, log_gaps = _gap_weights(values, dom)
    interior = np.array(
        [
            _sample_gap(padded, log_gaps, j / b, eps_q, rng.child("quantile", j))
            for j in range(1, b)
        ]
    )
    if ledger is not None:
        for j in range(1, b):
            ledger.charge("disc", "dp-quantile", eps=eps_q)
        ledger.charge("disc", "dp-quantile-unspent", eps=eps - eps_q * (b - 1), spent=False)
    return _assemble_edges(dom, interior)


def kmeans_edges(
    values: np.ndarray,
    b: int,
    eps: float,
    dom: ColumnDomain,
    iters: int,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
) -> BinEdges:
    """1-D DP Lloyd iterations; midpoints between surviving centers become cuts.

    Each iteration spends eps/iters, half on Geometric-noised cluster counts
    and half on Laplace-noised per-cluster sums (values pre-clamped to the
    domain, so the sum sensitivity is the domain width). Centers whose final
    noisy count falls below 1 are dropped, mirroring the usual empty-cluster
    behavior of fewer-than-b bins.
    """
    if eps <= 0:
        raise DataError(f"kmeans_edges needs eps > 0, got {eps}")
    vals = np.clip(np.asarray(values, dtype=np.float64), dom.lo, dom.hi)
    width = dom.width
    step = width / b
    centers = dom.lo + step * (np.arange(b) + 0.5)
    eps_iter = eps / iters
    eps_half = eps_iter / 2.0
    noisy_counts = np.zeros(b)
    for it in range(iters):
        it_rng = rng.child("kmeans", it)
        order = np.argsort(centers, kind="stable")
        sorted_centers = centers[order]
        cut = (sorted_centers[:-1] + sorted_centers[1:]) / 2.0
        assign = order[np.searchsorted(cut, vals, side="right")]
        counts = np.bincount(assign, minlength=b).astype(np.float64)
        sums = np.bincount(assign, weights=vals, minlength=b)
        noisy_counts = counts + two_sided_geometric(eps_half, 1, it_rng, size=b)
        noisy_sums = sums + laplace(width / eps_half, it_rng, size=b)
        centers = noisy_sums / np.maximum(noisy_counts, 1.0)
        if ledger is not None:
            ledger.charge("disc", "kmeans-counts", eps=eps_half)
            ledger.charge("disc", "kmeans-sums", eps=eps_half)
    survivors = np.sort(centers[noisy_counts >= 1])
    if survivors.size == 0:
        logger.warning("all k-means clusters empty; falling back to uniform edges")
        return uniform_edges(dom, b)
    midpoints = (survivors[:-1] + survivors[1:]) / 2.0
    return _assemble_edges(dom, midpoints)


def privtree_edges(
    values: np.ndarray,
    b: int,
    eps: float,
    dom: ColumnDomain,
    max_depth: int,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
) -> BinEdges:
    """Recursive binary domain splitting with noisy, depth-biased counts.

    A node [a, c) splits when (count + Laplace(lam))/n - depth*decay exceeds
    tau = 1/b, with lam = 3/eps and decay = lam*ln(2)/n (the fanout-2
    calibration of the original tree mechanism). A node sitting exactly at
    tau stays a leaf: the comparison carries a hair of relative slack so the
    zero-noise limit is deterministic instead of flipping on 1e-12 noise.
    The whole recursion is one eps charge. Leaves, left to right, define the
    bin edges; at least the root survives, so the result is never empty.
    """
    if eps <= 0:
        raise DataError(f"privtree_edges needs eps > 0, got {eps}")
    vals = np.sort(np.clip(np.asarray(values, dtype=np.float64), dom.lo, dom.hi))
    n = max(vals.size, 1)
    tau = 1.0 / b
    lam = 3.0 / eps
    decay = lam * np.log(2.0) / n
    cuts: list[float] = []

    def visit(a: float, c: float, depth: int, node_rng: RandomStream):
        left = np.searchsorted(vals, a, side="left")
        right = vals.size if c >= dom.hi else np.searchsorted(vals, c, side="left")
        count = right - left
        noisy = (count + float(laplace(lam, node_rng))) / n - depth * decay
        if noisy > tau * (1.0 + 1e-9) and depth < max_depth:
            mid = (a + c) / 2.0
            cuts.append(mid)
            visit(a, mid, depth + 1, node_rng.child("L"))
            visit(mid, c, depth + 1, node_rng.child("R"))

    visit(dom.lo, dom.hi, 0, rng.child("privtree"))
    if ledger is not None:
        ledger.charge("disc", "privtree", eps=eps)
    return _assemble_edges(dom, np.array(cuts))


def build_edges(
    values: np.ndarray,
    dom: ColumnDomain,
    cfg: DiscretizerConfig,
    eps: float,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
) -> BinEdges:
    """Dispatch one column through the configured discretizer."""
    if cfg.kind == "uniform":
        return uniform_edges(dom, cfg.b)
    if cfg.kind == "quantile":
        return quantile_edges(values, cfg.b, eps, dom, rng, ledger)
    if cfg.kind == "kmeans":
        return kmeans_edges(values, cfg.b, eps, dom, cfg.kmeans_iters, rng, ledger)
    return privtree_edges(values, cfg.b, eps, dom, cfg.privtree_max_depth, rng, ledger)


def discretize(table: Table, edges_per_column: list[BinEdges]) -> DiscreteTable:
    """Map each value to its bin index; values are clamped into the domain
    and the top edge is inclusive (v == hi lands in the last bin)."""
    if len(edges_per_column) != table.d:
        raise DataError("need one BinEdges per column")
    cols = []
    for c, be in enumerate(edges_per_column):
        v = np.clip(table.column(c), be.lo, be.hi)
        idx = np.searchsorted(be.edges, v, side="right") - 1
        cols.append(np.clip(idx, 0, be.nbins - 1))
    return DiscreteTable(
        table.column_names,
        np.column_stack(cols),
        tuple(be.nbins for be in edges_per_column),
    )


def decode(
    dt: DiscreteTable, edges_per_column: list[BinEdges], rng: RandomStream
) -> Table:
    """Back to continuous values: each cell is drawn uniformly within its bin.

    Uniform draws (rather than midpoints) keep synthetic minima and maxima
    varying across runs, which the attack's feature set relies on.
    """
    if len(edges_per_column) != dt.d:
        raise DataError("need one BinEdges per column")
    cols = []
    for c, be in enumerate(edges_per_column):
        idx = dt.column(c)
        lows = be.edges[idx]
        highs = be.edges[idx + 1]
        u = rng.gen.uniform(size=dt.n)
        cols.append(lows + u * (highs - lows))
    return Table(dt.column_names, np.column_stack(cols))
