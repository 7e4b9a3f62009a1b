import os

import numpy as np
import pytest

from domainleak import Table, load_csv

from _winelike import write_csv as write_winelike

WINE_ENV = "WINE_QUALITY_CSV"


@pytest.fixture(scope="session")
def wine_csv_path(tmp_path_factory):
    """Path to a white-wine quality CSV: the real one if WINE_QUALITY_CSV is
    set, otherwise the deterministic generated stand-in."""
    real = os.environ.get(WINE_ENV)
    if real:
        return real
    path = tmp_path_factory.mktemp("data") / "winequality-white.csv"
    write_winelike(path)
    return str(path)


@pytest.fixture(scope="session")
def wine_table(wine_csv_path) -> Table:
    return load_csv(wine_csv_path, delimiter=";", drop_columns=("quality",))


@pytest.fixture(scope="session")
def wine_key_columns(wine_table):
    """(free SO2 index, total SO2 index) — the target's two outlying columns."""
    names = wine_table.column_names
    return names.index("free sulfur dioxide"), names.index("total sulfur dioxide")


def random_table(seed: int, n: int = 60, d: int = 3, scale: float = 10.0) -> Table:
    rng = np.random.default_rng(seed)
    return Table(
        tuple(f"c{i}" for i in range(d)),
        rng.normal(0.0, scale, size=(n, d)) + rng.uniform(-5, 5, size=d),
    )
