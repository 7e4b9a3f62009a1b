"""Bayesian-network synthesizer: private structure search, noisy conditionals,
ancestral sampling.

Structure search is greedy: a uniformly random root, then d-1 steps that
each privately pick (attribute, parent set) by mutual information with the
exponential mechanism. Conditionals are Laplace-noised joint counts,
normalized per parent configuration. The model budget is split 50/50
between structure and measurement.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .mechanisms import BudgetLedger, RandomStream, exponential_mechanism, laplace
from .tabular import DataError, DiscreteTable

DEFAULT_MAX_PARENTS = 2


@dataclass(frozen=True)
class BayesNet:
    """Attribute ordering plus earlier-attribute parent sets (acyclic by construction)."""

    ordering: tuple[int, ...]
    parents: tuple[tuple[int, ...], ...]  # aligned with ordering

    def __post_init__(self):
        seen: set[int] = set()
        for attr, ps in zip(self.ordering, self.parents):
            if not set(ps) <= seen:
                raise DataError(f"parents of attribute {attr} must precede it")
            seen.add(attr)

    def to_json(self) -> dict:
        return {
            "ordering": list(self.ordering),
            "parents": {str(a): list(p) for a, p in zip(self.ordering, self.parents)},
        }


@dataclass(frozen=True)
class CPTSet:
    """Per attribute (in network order): rows over flattened parent configs,
    columns over child bins; every row is a probability distribution."""

    tables: tuple[np.ndarray, ...]

    def __post_init__(self):
        for t in self.tables:
            if t.ndim != 2 or np.any(t < 0):
                raise DataError("conditional tables must be 2-D and non-negative")
            if not np.allclose(t.sum(axis=1), 1.0, atol=1e-9):
                raise DataError("conditional rows must sum to 1")


def mutual_information(joint_counts: np.ndarray) -> float:
    """I(X;Y) in bits from a 2-way contingency table; 0 log 0 := 0."""
    counts = np.asarray(joint_counts, dtype=np.float64)
    if np.any(counts < 0):
        raise DataError("contingency counts must be non-negative")
    if counts.sum() <= 0:
        raise DataError("contingency table has zero total count")
    return _mi_from_joint(counts)


def _mi_from_joint(counts: np.ndarray) -> float:
    # only the non-zero cells contribute; joints are sparse for wide parents
    total = counts.sum()
    rows = counts.sum(axis=1)
    cols = counts.sum(axis=0)
    r, c = np.nonzero(counts)
    v = counts[r, c].astype(np.float64)
    return float(np.sum(v / total * np.log2(v * total / (rows[r] * cols[c]))))


def mi_sensitivity(n: int) -> float:
    """Add/remove sensitivity bound for empirical mutual information on n records."""
    if n < 2:
        raise DataError("need n >= 2 records")
    return (2.0 / n) * math.log2(n) + ((n - 1.0) / n) * math.log2(n / (n - 1.0))


def _flat_index(dt: DiscreteTable, attrs: tuple[int, ...]) -> tuple[np.ndarray, int]:
    """Fuse several columns into one mixed-radix index; returns (index, radix)."""
    idx = np.zeros(dt.n, dtype=np.int64)
    radix = 1
    for a in attrs:
        idx = idx * dt.bin_counts[a] + dt.column(a)
        radix *= dt.bin_counts[a]
    return idx, radix


def _rows_to_conditionals(noisy: np.ndarray) -> np.ndarray:
    """Clip negatives, normalize each row; rows left with zero mass become
    uniform. Depends only on the noised counts, never on the raw data."""
    clipped = np.maximum(noisy, 0.0)
    row_sums = clipped.sum(axis=1, keepdims=True)
    uniform = np.full(clipped.shape[1], 1.0 / clipped.shape[1])
    return np.where(row_sums > 0, clipped / np.where(row_sums > 0, row_sums, 1.0), uniform)


def _pair_mi(dt: DiscreteTable, child: int, parents: tuple[int, ...]) -> float:
    pidx, pradix = _flat_index(dt, parents)
    joint = np.bincount(
        pidx * dt.bin_counts[child] + dt.column(child),
        minlength=pradix * dt.bin_counts[child],
    ).reshape(pradix, dt.bin_counts[child])
    return mutual_information(joint)


def learn_network(
    dt: DiscreteTable,
    k: int,
    eps_struct: float,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
) -> BayesNet:
    """Greedy DP structure search with at most k parents per attribute.

    Each of the d-1 selection steps scores every (new attribute, parent
    subset of the chosen attributes, subset size min(k, chosen)) candidate
    by mutual information and samples one with the exponential mechanism at
    eps_struct/(d-1). eps_struct = 0 short-circuits to the plain argmax.
    """
    if k < 1:
        raise DataError("k must be >= 1")
    if eps_struct < 0:
        raise DataError("eps_struct must be non-negative")
    d = dt.d
    root = int(rng.gen.integers(d))
    ordering = [root]
    parent_sets: list[tuple[int, ...]] = [()]
    if d == 1:
        return BayesNet((root,), ((),))
    eps_step = eps_struct / (d - 1)
    sens = mi_sensitivity(dt.n)

    # the chosen set only grows, so candidate scores and fused parent
    # indices recur across steps; memoize both
    score_cache: dict[tuple[int, tuple[int, ...]], float] = {}
    pindex_cache: dict[tuple[int, ...], tuple[np.ndarray, int]] = {}

    def score(attr: int, ps: tuple[int, ...]) -> float:
        key = (attr, ps)
        if key not in score_cache:
            if ps not in pindex_cache:
                pindex_cache[ps] = _flat_index(dt, ps)
            pidx, pradix = pindex_cache[ps]
            nbins = dt.bin_counts[attr]
            joint = np.bincount(
                pidx * nbins + dt.column(attr), minlength=pradix * nbins
            ).reshape(pradix, nbins)
            score_cache[key] = _mi_from_joint(joint)
        return score_cache[key]

    for _ in range(d - 1):
        chosen = ordering
        size = min(k, len(chosen))
        candidates = [
            (attr, ps)
            for attr in range(d)
            if attr not in chosen
            for ps in itertools.combinations(chosen, size)
        ]
        scores = np.array([score(attr, ps) for attr, ps in candidates])
        if eps_struct == 0:
            pick = int(np.argmax(scores))
        else:
            pick = exponential_mechanism(scores, sens, eps_step, rng.child("structure", len(chosen)))
            if ledger is not None:
                ledger.charge("model", "privbayes-structure", eps=eps_step)
        attr, ps = candidates[pick]
        ordering.append(attr)
        parent_sets.append(ps)
    return BayesNet(tuple(ordering), tuple(parent_sets))


def measure_conditionals(
    dt: DiscreteTable,
    net: BayesNet,
    eps_measure: float,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
) -> CPTSet:
    """Laplace-noised joint counts turned into per-parent-config conditionals.

    The d marginals compose sequentially, so each gets eps_measure/d and
    Laplace scale d/eps_measure (add/remove count sensitivity 1). Negative
    noisy cells clip to zero; parent configurations with no mass become
    uniform rows.
    """
    if eps_measure <= 0:
        raise DataError(f"eps_measure must be positive, got {eps_measure}")
    d = dt.d
    scale = d / eps_measure
    tables = []
    for step, (attr, ps) in enumerate(zip(net.ordering, net.parents)):
        pidx, pradix = _flat_index(dt, ps)
        nbins = dt.bin_counts[attr]
        counts = np.bincount(
            pidx * nbins + dt.column(attr), minlength=pradix * nbins
        ).reshape(pradix, nbins).astype(np.float64)
        noisy = counts + laplace(scale, rng.child("measure", step), size=counts.shape)
        tables.append(_rows_to_conditionals(noisy))
        if ledger is not None:
            ledger.charge("model", "privbayes-marginal", eps=eps_measure / d)
    return CPTSet(tuple(tables))


def sample_network(
    net: BayesNet, cpts: CPTSet, bin_counts: tuple[int, ...], n_out: int,
    rng: RandomStream, column_names: tuple[str, ...] | None = None,
) -> DiscreteTable:
    """Ancestral sampling along the learned ordering; n_out rows."""
    d = len(net.ordering)
    if column_names is None:
        column_names = tuple(f"col{i}" for i in range(d))
    out = np.zeros((n_out, d), dtype=np.int64)
    for step, (attr, ps) in enumerate(zip(net.ordering, net.parents)):
        cpt = cpts.tables[step]
        if ps:
            pidx = np.zeros(n_out, dtype=np.int64)
            for a in ps:
                pidx = pidx * bin_counts[a] + out[:, a]
        else:
            pidx = np.zeros(n_out, dtype=np.int64)
        cdf = np.cumsum(cpt, axis=1)
        u = rng.gen.uniform(size=n_out)
        out[:, attr] = (cdf[pidx] < u[:, None]).sum(axis=1).clip(0, cpt.shape[1] - 1)
    return DiscreteTable(column_names, out, tuple(bin_counts))


def fit_and_sample(
    dt: DiscreteTable,
    eps_model: float,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
    k: int = DEFAULT_MAX_PARENTS,
    n_out: int | None = None,
) -> tuple[DiscreteTable, BayesNet]:
    """Full generator pass: learn structure, measure conditionals, sample.

    Returns the synthetic table and the fitted network for auditing.
    """
    net = learn_network(dt, k, eps_model / 2.0, rng.child("privbayes-structure"), ledger)
    cpts = measure_conditionals(
        dt, net, eps_model / 2.0, rng.child("privbayes-measure"), ledger
    )
    n = dt.n if n_out is None else n_out
    synth = sample_network(
        net, cpts, dt.bin_counts, n, rng.child("privbayes-sample"), dt.column_names
    )
    return synth, net
