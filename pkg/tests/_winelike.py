"""Deterministic stand-in for the UCI white-wine quality CSV.

The build environment cannot download the real file, so the suite runs on a
generated dataset with the same shape and the same attack-relevant
structure: 4898 rows, 11 continuous physicochemical columns plus a dropped
"quality" label, ';' delimiter, and one record that is simultaneously the
most distant from all others and strictly outside the remaining records'
range in exactly two columns (free/total sulfur dioxide, 289/440 against
remaining maxima of exactly 146.5/366.5). A second planted record is far
from the bulk but strictly inside every remaining range, for inside-mode
games. Set WINE_QUALITY_CSV to a real winequality-white.csv to run the
suite against the genuine data instead.
"""

from __future__ import annotations

import csv

import numpy as np

N_ROWS = 4898
TARGET_ROW = 4746
INSIDE_ROW = 1234
SEED = 19720831

COLUMNS = [
    "fixed acidity",
    "volatile acidity",
    "citric acid",
    "residual sugar",
    "chlorides",
    "free sulfur dioxide",
    "total sulfur dioxide",
    "density",
    "pH",
    "sulphates",
    "alcohol",
]

FREE_SO2 = COLUMNS.index("free sulfur dioxide")
TOTAL_SO2 = COLUMNS.index("total sulfur dioxide")

TARGET_FREE_SO2 = 289.0
TARGET_TOTAL_SO2 = 440.0
REST_MAX_FREE_SO2 = 146.5
REST_MAX_TOTAL_SO2 = 366.5


def _column_specs():
    # (mean, sd, lo, hi, decimals) per column; loosely wine-shaped
    return [
        (6.85, 0.84, 3.8, 14.2, 2),
        (0.28, 0.10, 0.08, 1.10, 3),
        (0.33, 0.12, 0.0, 1.66, 2),
        (6.39, 5.07, 0.6, 65.8, 2),
        (0.046, 0.021, 0.009, 0.346, 3),
        (35.3, 15.0, 2.0, 125.0, 1),
        (138.4, 42.5, 9.0, 355.0, 1),
        (0.994, 0.003, 0.987, 1.039, 5),
        (3.19, 0.15, 2.72, 3.82, 2),
        (0.49, 0.11, 0.22, 1.08, 2),
        (10.51, 1.23, 8.0, 14.2, 2),
    ]


def build_values() -> np.ndarray:
    rng = np.random.default_rng(SEED)
    specs = _column_specs()
    cols = []
    for mean, sd, lo, hi, dec in specs:
        draws = rng.normal(mean, sd, size=N_ROWS)
        cols.append(np.round(np.clip(draws, lo, hi), dec))
    values = np.column_stack(cols)

    # wine's non-sulfur columns are right-skewed; give a handful a modest
    # high tail (3% of rows near +3.5 sd) so far bins stay populated
    for c in (0, 2, 3, 7, 8, 9):
        mean, sd, lo, hi, dec = specs[c]
        bump = rng.choice(N_ROWS, size=int(0.03 * N_ROWS), replace=False)
        draws = rng.normal(mean + 3.5 * sd, sd, size=bump.size)
        values[bump, c] = np.round(np.clip(draws, lo, hi), dec)

    # a light upper tail for the sulfur columns keeps the histogram bins
    # above the bulk populated like the real data
    tail = rng.integers(0, N_ROWS, size=40)
    values[tail, FREE_SO2] = np.round(rng.uniform(80.0, 125.0, size=40), 1)
    high_free = [131.0, 138.5, REST_MAX_FREE_SO2]
    high_total = np.round(rng.uniform(260.0, 360.0, size=14), 1).tolist() + [REST_MAX_TOTAL_SO2]
    spots = rng.choice(
        [i for i in range(N_ROWS) if i not in (TARGET_ROW, INSIDE_ROW)],
        size=len(high_free) + len(high_total),
        replace=False,
    )
    for offset, v in enumerate(high_free):
        values[spots[offset], FREE_SO2] = v
    for offset, v in enumerate(high_total):
        values[spots[len(high_free) + offset], TOTAL_SO2] = v

    # the outside-mode target: alone beyond both sulfur maxima
    values[TARGET_ROW] = values[rng.integers(0, N_ROWS)]
    values[TARGET_ROW, FREE_SO2] = TARGET_FREE_SO2
    values[TARGET_ROW, TOTAL_SO2] = TARGET_TOTAL_SO2

    # the inside-mode plant: far from the bulk in every column at once, but
    # always in a populated bin of the 20-bin grid, like a real combination
    # outlier whose marginals each have plenty of company
    for c in range(len(COLUMNS)):
        col = np.delete(values[:, c], [TARGET_ROW, INSIDE_ROW])
        lo, hi = col.min(), col.max()
        full_lo = min(lo, values[TARGET_ROW, c])
        full_hi = max(hi, values[TARGET_ROW, c])
        edges = np.linspace(full_lo, full_hi, 21)
        counts, _ = np.histogram(col, bins=edges)
        centers = (edges[:-1] + edges[1:]) / 2
        z = np.abs(centers - col.mean()) / col.std()
        ok = (counts >= 30) & (centers > lo) & (centers < hi)
        pick = int(np.argmax(np.where(ok, z, -np.inf)))
        values[INSIDE_ROW, c] = np.round(centers[pick], specs[c][4])
    return values


def quality_column() -> np.ndarray:
    rng = np.random.default_rng(SEED + 1)
    return rng.integers(3, 10, size=N_ROWS)


def write_csv(path) -> None:
    values = build_values()
    quality = quality_column()
    with open(path, "w", newline="") as fh:
        # header quoted like the UCI export, data rows plain
        fh.write(";".join(f'"{name}"' for name in COLUMNS + ["quality"]) + "\r\n")
        writer = csv.writer(fh, delimiter=";")
        for row, q in zip(values, quality):
            writer.writerow([format(v, ".9g") for v in row] + [int(q)])
