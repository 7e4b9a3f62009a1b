"""Spanning-tree synthesizer: Gaussian-measured marginals on a privately
selected maximum spanning tree, followed by exact tree-structured sampling.

The budget is handled in zCDP: (eps, delta) converts to a total rho, split
in equal thirds between one-way measurement, edge selection, and two-way
measurement. Because the selected marginals form a tree, iterative
proportional fitting plus ancestral sampling is exact inference; no general
graphical-model engine is needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .mechanisms import (
    BudgetLedger,
    RandomStream,
    exponential_mechanism,
    gaussian,
    rho_for_eps_delta,
    sigma_for_rho,
)
from .privbayes import _pair_mi, mi_sensitivity
from .tabular import DataError, DiscreteTable

IPF_ROUNDS = 100
IPF_TOL = 1e-9


@dataclass(frozen=True)
class TreeModel:
    """Noisy one-way marginals per attribute plus two-way marginals on tree edges.

    Marginals hold expected counts (total mass n). ``calibrated`` means the
    negatives are cleared and every edge table exactly matches its two
    adjacent one-way marginals.
    """

    bin_counts: tuple[int, ...]
    edges: tuple[tuple[int, int], ...]
    one_way: tuple[np.ndarray, ...]
    two_way: dict[tuple[int, int], np.ndarray]
    total: float
    sigma_one: float
    sigma_two: float
    calibrated: bool = False
    column_names: tuple[str, ...] = field(default=())

    @property
    def d(self) -> int:
        return len(self.bin_counts)

    def to_json(self) -> dict:
        return {
            "edges": [list(e) for e in self.edges],
            "sigma_one_way": self.sigma_one,
            "sigma_two_way": self.sigma_two,
        }


def _spanning_tree_ok(d: int, edges) -> bool:
    if d == 1:
        return len(edges) == 0
    if len(edges) != d - 1:
        return False
    parent = list(range(d))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for a, b in edges:
        ra, rb = find(a), find(b)
        if ra == rb:
            return False
        parent[ra] = rb
    return True


def fit_mst(
    dt: DiscreteTable,
    eps_model: float,
    delta: float,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
) -> TreeModel:
    """Measure one-ways, privately select a spanning tree, measure its edges.

    Candidate edges are weighted by the empirical mutual information of
    their two-way marginal; the tree is grown in Kruskal fashion, each of
    the d-1 accepted edges drawn by the exponential mechanism over the
    currently acyclic candidates. Selection steps consume the middle rho
    third, converted per step via eps = sqrt(8 * rho_step).
    """
    rho_total = rho_for_eps_delta(eps_model, delta)
    rho_third = rho_total / 3.0
    d = dt.d
    n = float(dt.n)

    sigma_one = sigma_for_rho(rho_third, 1.0, d)
    one_way = []
    for a in range(d):
        counts = np.bincount(dt.column(a), minlength=dt.bin_counts[a]).astype(np.float64)
        noisy = counts + gaussian(sigma_one, rng.child("one-way", a), size=counts.size)
        one_way.append(noisy)
        if ledger is not None:
            ledger.charge("model", "mst-one-way", rho=rho_third / d)

    if d == 1:
        tree_edges: list[tuple[int, int]] = []
        sigma_two = 0.0
        # the selection and two-way thirds are unused but still accounted
        if ledger is not None:
            ledger.charge("model", "mst-select-unused", rho=rho_third, spent=False)
            ledger.charge("model", "mst-two-way-unused", rho=rho_third, spent=False)
    else:
        candidates = [(a, b) for a in range(d) for b in range(a + 1, d)]
        weights = {e: _pair_mi(dt, e[1], (e[0],)) for e in candidates}
        sens = mi_sensitivity(dt.n)
        rho_step = rho_third / (d - 1)
        eps_step = math.sqrt(8.0 * rho_step)
        parent = list(range(d))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        tree_edges = []
        for step in range(d - 1):
            valid = [e for e in candidates if find(e[0]) != find(e[1])]
            scores = np.array([weights[e] for e in valid])
            pick = exponential_mechanism(scores, sens, eps_step, rng.child("select", step))
            a, b = valid[pick]
            tree_edges.append((a, b))
            parent[find(a)] = find(b)
            if ledger is not None:
                ledger.charge("model", "mst-select", rho=rho_step)

        sigma_two = sigma_for_rho(rho_third, 1.0, d - 1)
        two_way = {}
        for a, b in tree_edges:
            joint = np.bincount(
                dt.column(a) * dt.bin_counts[b] + dt.column(b),
                minlength=dt.bin_counts[a] * dt.bin_counts[b],
            ).reshape(dt.bin_counts[a], dt.bin_counts[b]).astype(np.float64)
            noisy = joint + gaussian(
                sigma_two, rng.child("two-way", a, b), size=joint.shape
            )
            two_way[(a, b)] = noisy
            if ledger is not None:
                ledger.charge("model", "mst-two-way", rho=rho_third / (d - 1))

    model = TreeModel(
        bin_counts=dt.bin_counts,
        edges=tuple(tree_edges),
        one_way=tuple(one_way),
        two_way=two_way if d > 1 else {},
        total=n,
        sigma_one=sigma_one,
        sigma_two=sigma_two,
        column_names=dt.column_names,
    )
    if not _spanning_tree_ok(d, model.edges):
        raise DataError("selected edge set is not a spanning tree")
    return model


def _normalize_mass(arr: np.ndarray, total: float) -> np.ndarray:
    clipped = np.maximum(arr, 0.0)
    s = clipped.sum()
    if s <= 0:
        return np.full_like(arr, total / arr.size)
    return clipped * (total / s)


def calibrate(model: TreeModel) -> TreeModel:
    """Clip, renormalize, and IPF every edge table onto its one-way margins.

    After calibration each two-way table is non-negative, sums to the total
    mass, and reproduces both adjacent one-way marginals to IPF_TOL, which
    makes tree-structured ancestral sampling exact. Calibration is a fixed
    point: running it twice changes nothing.
    """
    one_way = tuple(_normalize_mass(v, model.total) for v in model.one_way)
    two_way = {}
    for (a, b), table in model.two_way.items():
        t = np.maximum(table, 0.0)
        if t.sum() <= 0:
            t = np.full_like(t, model.total / t.size)
        row_target = one_way[a]
        col_target = one_way[b]
        zero_rows = t.sum(axis=1) == 0
        if np.any(zero_rows):
            t[zero_rows] = 1.0 / t.shape[1]
        zero_cols = t.sum(axis=0) == 0
        if np.any(zero_cols):
            t[:, zero_cols] = np.maximum(t[:, zero_cols], 1.0 / t.shape[0])
        for _ in range(IPF_ROUNDS):
            row_sums = t.sum(axis=1)
            t = t * np.where(row_sums > 0, row_target / np.where(row_sums > 0, row_sums, 1), 0)[:, None]
            col_sums = t.sum(axis=0)
            t = t * np.where(col_sums > 0, col_target / np.where(col_sums > 0, col_sums, 1), 0)[None, :]
            mismatch = max(
                np.abs(t.sum(axis=1) - row_target).max(),
                np.abs(t.sum(axis=0) - col_target).max(),
            )
            if mismatch < IPF_TOL:
                break
        two_way[(a, b)] = t
    return replace(model, one_way=one_way, two_way=two_way, calibrated=True)


def sample_tree(model: TreeModel, n_out: int, rng: RandomStream) -> DiscreteTable:
    """Ancestral sampling: root attribute 0 from its marginal, then children
    along tree edges from the conditional implied by each edge table."""
    if not model.calibrated:
        raise DataError("model must be calibrated before sampling")
    d = model.d
    out = np.zeros((n_out, d), dtype=np.int64)

    def draw(dist: np.ndarray, size: int, stream: RandomStream) -> np.ndarray:
        p = dist / dist.sum()
        cdf = np.cumsum(p)
        u = stream.gen.uniform(size=size)
        return np.searchsorted(cdf, u, side="right").clip(0, p.size - 1)

    root_dist = model.one_way[0]
    out[:, 0] = draw(root_dist, n_out, rng.child("root"))

    # breadth-first over the undirected tree from attribute 0
    adjacency: dict[int, list[tuple[int, tuple[int, int]]]] = {i: [] for i in range(d)}
    for e in model.edges:
        a, b = e
        adjacency[a].append((b, e))
        adjacency[b].append((a, e))
    visited = {0}
    frontier = [0]
    while frontier:
        nxt = []
        for parent_attr in frontier:
            for child_attr, e in adjacency[parent_attr]:
                if child_attr in visited:
                    continue
                visited.add(child_attr)
                nxt.append(child_attr)
                table = model.two_way[e]
                cond = table if e[0] == parent_attr else table.T
                row_sums = cond.sum(axis=1, keepdims=True)
                probs = np.where(
                    row_sums > 0,
                    cond / np.where(row_sums > 0, row_sums, 1.0),
                    1.0 / cond.shape[1],
                )
                cdf = np.cumsum(probs, axis=1)
                u = rng.child("edge", *e).gen.uniform(size=n_out)
                pvals = out[:, parent_attr]
                out[:, child_attr] = (cdf[pvals] < u[:, None]).sum(axis=1).clip(
                    0, cond.shape[1] - 1
                )
        frontier = nxt
    names = model.column_names or tuple(f"col{i}" for i in range(d))
    return DiscreteTable(names, out, model.bin_counts)


def fit_and_sample(
    dt: DiscreteTable,
    eps_model: float,
    delta: float,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
    n_out: int | None = None,
) -> tuple[DiscreteTable, TreeModel]:
    """Full generator pass: fit, calibrate, sample; returns model for audit."""
    model = calibrate(fit_mst(dt, eps_model, delta, rng, ledger))
    n = dt.n if n_out is None else n_out
    synth = sample_tree(model, n, rng.child("mst-sample"))
    return synth, model
