"""Columnar continuous-data model: CSV ingestion, per-column bounds, bin edges.

Everything downstream (domain extraction, discretizers, generators, the
attack harness) consumes the types defined here. Tables are immutable and
safe to share across parallel shadow-game workers.
"""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist, squareform

logger = logging.getLogger(__name__)

PROVENANCE_PROVIDED = "provided"
PROVENANCE_DIRECT = "direct"
PROVENANCE_DP = "dp"
PROVENANCES = (PROVENANCE_PROVIDED, PROVENANCE_DIRECT, PROVENANCE_DP)


class DataError(ValueError):
    """Malformed input data (parse failures, empty tables, bad bounds)."""


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Table:
    """Continuous dataset: n rows of d real-valued columns, no NaN/inf."""

    column_names: tuple[str, ...]
    values: np.ndarray  # shape (n, d), float64, read-only

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim != 2:
            raise DataError(f"table values must be 2-D, got shape {vals.shape}")
        if vals.shape[0] < 1:
            raise DataError("table must contain at least one row")
        if vals.shape[1] != len(self.column_names):
            raise DataError(
                f"{len(self.column_names)} column names but {vals.shape[1]} columns"
            )
        if not np.all(np.isfinite(vals)):
            raise DataError("table contains NaN or infinite values")
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "values", _frozen(vals))

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, col: int) -> np.ndarray:
        return self.values[:, col]

    def drop_row(self, row: int) -> "Table":
        if not 0 <= row < self.n:
            raise IndexError(f"row {row} out of range for n={self.n}")
        keep = np.ones(self.n, dtype=bool)
        keep[row] = False
        return Table(self.column_names, self.values[keep].copy())


@dataclass(frozen=True)
class ColumnDomain:
    """Per-column value bounds assumed by pre-processing; lo < hi strictly."""

    lo: float
    hi: float

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise DataError(f"non-finite column bounds ({self.lo}, {self.hi})")
        if not self.lo < self.hi:
            raise DataError(f"column bounds must satisfy lo < hi, got ({self.lo}, {self.hi})")

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Domain:
    """Per-column bounds plus how they were obtained (provided/direct/dp)."""

    bounds: tuple[ColumnDomain, ...]
    provenance: str

    def __post_init__(self):
        if self.provenance not in PROVENANCES:
            raise DataError(f"unknown provenance {self.provenance!r}")
        object.__setattr__(self, "bounds", tuple(self.bounds))
        if len(self.bounds) == 0:
            raise DataError("domain must cover at least one column")

    @property
    def d(self) -> int:
        return len(self.bounds)


@dataclass(frozen=True)
class BinEdges:
    """Sorted cut points for one column; b' bins need b'+1 strictly increasing edges."""

    edges: np.ndarray

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.float64)
        if e.ndim != 1 or e.size < 2:
            raise DataError("bin edges need at least two cut points")
        if not np.all(np.diff(e) > 0):
            raise DataError("bin edges must be strictly increasing")
        object.__setattr__(self, "edges", _frozen(e))

    @property
    def nbins(self) -> int:
        return self.edges.size - 1

    @property
    def lo(self) -> float:
        return float(self.edges[0])

    @property
    def hi(self) -> float:
        return float(self.edges[-1])


@dataclass(frozen=True)
class DiscreteTable:
    """Binned integer form of a Table; column c holds indices in [0, bin_counts[c])."""

    column_names: tuple[str, ...]
    values: np.ndarray  # shape (n, d), int64, read-only
    bin_counts: tuple[int, ...] = field(default=())

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=np.int64)
        if vals.ndim != 2:
            raise DataError(f"discrete values must be 2-D, got shape {vals.shape}")
        counts = tuple(int(b) for b in self.bin_counts)
        if len(counts) != vals.shape[1]:
            raise DataError("one bin count per column required")
        for c, b in enumerate(counts):
            if b < 1:
                raise DataError(f"column {c}: bin count must be >= 1")
            if vals.shape[0] and (vals[:, c].min() < 0 or vals[:, c].max() >= b):
                raise DataError(f"column {c}: bin index outside [0, {b})")
        object.__setattr__(self, "column_names", tuple(self.column_names))
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "bin_counts", counts)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    def column(self, col: int) -> np.ndarray:
        return self.values[:, col]


def load_csv(path, delimiter: str = ";", drop_columns: tuple[str, ...] = ()) -> Table:
    """Read a delimited text file with a header row into a Table.

    Every retained cell must parse as a real number; failures are reported
    with their row and column so bad exports are easy to pinpoint.
    """
    drop = set(drop_columns)
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: file is empty") from None
        header = [h.strip().strip('"') for h in header]
        missing = drop - set(header)
        if missing:
            raise DataError(f"{path}: drop columns not present: {sorted(missing)}")
        keep_idx = [i for i, h in enumerate(header) if h not in drop]
        names = [header[i] for i in keep_idx]
        rows = []
        for row_no, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise DataError(
                    f"{path}: row {row_no} has {len(row)} fields, expected {len(header)}"
                )
            parsed = []
            for i in keep_idx:
                cell = row[i].strip()
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {row_no}, column {header[i]!r}: "
                        f"cannot parse {cell!r} as a number"
                    ) from None
                if not np.isfinite(v):
                    raise DataError(
                        f"{path}: row {row_no}, column {header[i]!r}: non-finite value {cell!r}"
                    )
                parsed.append(v)
            rows.append(parsed)
    if not rows:
        raise DataError(f"{path}: no data rows")
    if not names:
        raise DataError(f"{path}: no columns left after dropping {sorted(drop)}")
    return Table(tuple(names), np.array(rows, dtype=np.float64))


def write_csv(table: Table, path) -> None:
    """Write a Table as comma-separated text, 9 significant digits per cell."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, delimiter=",")
        writer.writerow(table.column_names)
        for row in table.values:
            writer.writerow([format(v, ".9g") for v in row])


def direct_range(table: Table, col: int) -> ColumnDomain:
    """Raw min/max of one column. Not DP: reading this leaks the data range.

    Constant columns come back epsilon-widened instead of erroring so that
    pathological shadow resamples never abort a pipeline.
    """
    if not 0 <= col < table.d:
        raise IndexError(f"column {col} out of range for d={table.d}")
    vals = table.column(col)
    lo = float(vals.min())
    hi = float(vals.max())
    if lo == hi:
        widened = hi + 1e-9 * abs(lo) + 1e-9
        logger.warning("column %d is constant at %g; widening hi to %g", col, lo, widened)
        hi = widened
    return ColumnDomain(lo, hi)


def mean_pairwise_distance(table: Table) -> np.ndarray:
    """Mean standardized Euclidean distance from each record to all others.

    Columns are standardized with the population (1/n) standard deviation;
    zero-variance columns contribute nothing. Used to rank outlierness when
    picking an attack target.
    """
    if table.n < 2:
        raise DataError("need at least two records to compute pairwise distances")
    vals = table.values
    mu = vals.mean(axis=0)
    sd = vals.std(axis=0)
    safe_sd = np.where(sd > 0, sd, 1.0)
    z = (vals - mu) / safe_sd
    z[:, sd == 0] = 0.0
    dist = squareform(pdist(z, metric="euclidean"))
    return dist.sum(axis=1) / (table.n - 1)
