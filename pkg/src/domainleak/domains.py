"""Data-domain strategies: provided bounds, direct min/max, DP estimation.

The DP estimator builds a noisy histogram over a fixed exponential grid of
bin edges (..., -4, -2, -1, 0, 1, 2, 4, ..., capped at +/- 2^m), then walks
a threshold down until some bin's noisy count clears it; the lowest and
highest qualifying bin edges become the bounds. Because the output bounds
are always members of the fixed grid, the raw per-record min/max is never
exposed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .mechanisms import BudgetLedger, RandomStream, laplace
from .tabular import (
    PROVENANCE_DIRECT,
    PROVENANCE_DP,
    PROVENANCE_PROVIDED,
    ColumnDomain,
    DataError,
    Domain,
    Table,
    direct_range,
)

logger = logging.getLogger(__name__)


class DomainExtractionError(RuntimeError):
    """No histogram bin cleared the detection threshold."""


@dataclass(frozen=True)
class ExtractionConfig:
    """Noisy-histogram settings: grid extent 2^m and per-bound failure probability."""

    m: int = 32
    beta: float = 1e-9
    eps: float = 0.0

    def __post_init__(self):
        if self.m < 1:
            raise DataError("grid exponent m must be >= 1")
        if not 0 < self.beta < 1:
            raise DataError("beta must lie in (0, 1)")


def histogram_grid(m: int) -> np.ndarray:
    """Fixed edges [-2^m, ..., -2, -1, 0, 1, 2, ..., 2^m] giving 2m+2 bins."""
    powers = 2.0 ** np.arange(m + 1)  # 1, 2, 4, ..., 2^m
    return np.concatenate([-powers[::-1], [0.0], powers])


def provided_domain(spec: list[tuple[float, float]]) -> Domain:
    """Externally supplied bounds; consumes no privacy budget."""
    if not spec:
        raise DataError("provided domain spec is empty")
    return Domain(tuple(ColumnDomain(float(lo), float(hi)) for lo, hi in spec), PROVENANCE_PROVIDED)


def direct_domain(table: Table, ledger: BudgetLedger | None = None) -> Domain:
    """Per-column raw min/max. Breaks end-to-end DP; the ledger is stamped
    with an infinite-epsilon sentinel so downstream audits cannot miss it."""
    bounds = tuple(direct_range(table, c) for c in range(table.d))
    if ledger is not None:
        ledger.mark_leak("extract", "direct-domain")
    return Domain(bounds, PROVENANCE_DIRECT)


def dp_domain_column(
    values: np.ndarray,
    eps: float,
    cfg: ExtractionConfig,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
) -> ColumnDomain:
    """Estimate one column's bounds from a Laplace-noised histogram.

    Values are clamped into [-2^m, 2^m] and counted on the fixed grid
    (disjoint bins, so add/remove sensitivity is 1 and one eps covers the
    whole histogram). The initial threshold ln(1/(2 beta))/eps keeps the
    probability that an empty bin's noise clears it at beta; it is halved
    while nothing qualifies, stopping once it reaches 1.
    """
    if eps <= 0:
        raise DataError(f"dp domain extraction needs eps > 0, got {eps}")
    edges = histogram_grid(cfg.m)
    top = float(edges[-1])
    vals = np.clip(np.asarray(values, dtype=np.float64), -top, top)
    idx = np.clip(np.searchsorted(edges, vals, side="right") - 1, 0, edges.size - 2)
    counts = np.bincount(idx, minlength=edges.size - 1).astype(np.float64)
    noisy = counts + laplace(1.0 / eps, rng, size=counts.size)
    if ledger is not None:
        ledger.charge("extract", "dp-domain-histogram", eps=eps)

    t = np.log(1.0 / (2.0 * cfg.beta)) / eps
    while not np.any(noisy >= t) and t > 1.0:
        t /= 2.0
    qualifying = np.flatnonzero(noisy >= t)
    if qualifying.size == 0:
        raise DomainExtractionError(
            f"domain extraction failed: no bin reached threshold {t:.4g}"
        )
    lo = float(edges[qualifying[0]])
    hi = float(edges[qualifying[-1] + 1])
    return ColumnDomain(lo, hi)


def dp_domain(
    table: Table,
    eps_total: float,
    cfg: ExtractionConfig,
    rng: RandomStream,
    ledger: BudgetLedger | None = None,
) -> Domain:
    """DP bounds for every column, splitting eps_total evenly across columns.

    Each record contributes to every column, so the split composes
    sequentially. A column whose histogram never clears the threshold falls
    back to the full grid range rather than aborting the pipeline.
    """
    if eps_total <= 0:
        raise DataError(f"dp domain extraction needs eps_total > 0, got {eps_total}")
    eps_col = eps_total / table.d
    top = float(2.0**cfg.m)
    bounds = []
    for c in range(table.d):
        col_rng = rng.child("dp-domain", c)
        try:
            bounds.append(dp_domain_column(table.column(c), eps_col, cfg, col_rng, ledger))
        except DomainExtractionError:
            logger.warning("column %d: domain extraction failed; using full grid range", c)
            bounds.append(ColumnDomain(-top, top))
    return Domain(tuple(bounds), PROVENANCE_DP)
