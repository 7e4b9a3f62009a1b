"""Experiment orchestration: config files, cell sweeps, result persistence.

A config describes a dataset plus lists of strategies, discretizers,
generators, and (eps_pre, eps_model) pairs; their Cartesian product is the
set of cells, each evaluated with one shadow game. Results are JSON with a
config fingerprint so sweeps can resume and reruns can be checked for
byte-identity.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .attack import GameConfig, budget_for, run_shadow_game, select_target
from .charts import grouped_bar_svg
from .discretizers import DISCRETIZER_KINDS, DiscretizerConfig
from .domains import ExtractionConfig
from .tabular import Table, load_csv

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
OUTPUT_DIR_ENV = "DOMAINLEAK_OUTDIR"
STRATEGIES = ("provided", "direct", "dp")


class ConfigError(ValueError):
    """Invalid experiment config; the message carries the offending field path."""


@dataclass(frozen=True)
class ExperimentConfig:
    dataset_path: str
    delimiter: str = ";"
    drop_columns: tuple[str, ...] = ()
    strategies: tuple[str, ...] = ("provided", "direct", "dp")
    discretizers: tuple[str, ...] = DISCRETIZER_KINDS
    generators: tuple[str, ...] = ("privbayes", "mst")
    eps_pairs: tuple[tuple[float, float], ...] = ((1.0, 1.0),)
    delta: float = 1e-5
    bins: int = 20
    n_runs: int = 200
    target_mode: str = "outside"
    master_seed: int = 0
    provided_bounds: tuple[tuple[float, float], ...] | None = None
    kmeans_iters: int = 5
    privtree_max_depth: int = 20
    privbayes_k: int = 2
    extraction_m: int = 32
    extraction_beta: float = 1e-9
    output_dir: str = "."

    def to_json(self) -> dict:
        rec = asdict(self)
        rec["schema_version"] = SCHEMA_VERSION
        return rec


def _require(cond: bool, path: str, message: str):
    if not cond:
        raise ConfigError(f"{path}: {message}")


def config_from_dict(raw: dict, base_dir: Path | None = None) -> ExperimentConfig:
    """Validate a parsed JSON config; error messages carry field paths."""
    _require(isinstance(raw, dict), "<root>", "config must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    _require(version == SCHEMA_VERSION, "schema_version", f"unsupported version {version}")
    known = set(ExperimentConfig.__dataclass_fields__) | {"schema_version"}
    for key in raw:
        _require(key in known, key, "unknown field")
    _require("dataset_path" in raw, "dataset_path", "required field missing")
    path = Path(raw["dataset_path"])
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    _require(path.exists(), "dataset_path", f"file not found: {path}")

    def seq(key, default):
        v = raw.get(key, default)
        _require(isinstance(v, (list, tuple)) and len(v) > 0, key, "must be a non-empty list")
        return tuple(v)

    strategies = seq("strategies", list(STRATEGIES))
    for i, s in enumerate(strategies):
        _require(s in STRATEGIES, f"strategies[{i}]", f"unknown strategy {s!r}")
    discretizers = seq("discretizers", list(DISCRETIZER_KINDS))
    for i, kind in enumerate(discretizers):
        _require(kind in DISCRETIZER_KINDS, f"discretizers[{i}]", f"unknown discretizer {kind!r}")
    generators = seq("generators", ["privbayes", "mst"])
    for i, g in enumerate(generators):
        _require(g in ("privbayes", "mst"), f"generators[{i}]", f"unknown generator {g!r}")
    eps_pairs = []
    for i, pair in enumerate(seq("eps_pairs", [[1.0, 1.0]])):
        _require(
            isinstance(pair, (list, tuple)) and len(pair) == 2,
            f"eps_pairs[{i}]", "must be [eps_pre, eps_model]",
        )
        pre, model = float(pair[0]), float(pair[1])
        _require(pre > 0 and model > 0, f"eps_pairs[{i}]", "epsilons must be positive")
        eps_pairs.append((pre, model))
    delta = float(raw.get("delta", 1e-5))
    _require(0 < delta < 1, "delta", "must lie in (0, 1)")
    bins = int(raw.get("bins", 20))
    _require(bins >= 2, "bins", "must be >= 2")
    n_runs = int(raw.get("n_runs", 200))
    _require(n_runs >= 2, "n_runs", "must be >= 2")
    target_mode = raw.get("target_mode", "outside")
    _require(target_mode in ("outside", "inside"), "target_mode", "must be outside|inside")
    provided = raw.get("provided_bounds")
    if provided is None and "provided" in strategies:
        provided = []  # filled from the full dataset below (documented default)
    bounds = None
    if provided is not None:
        bounds = tuple((float(lo), float(hi)) for lo, hi in provided) or None
    out_dir = raw.get("output_dir") or os.environ.get(OUTPUT_DIR_ENV, ".")
    return ExperimentConfig(
        dataset_path=str(path),
        delimiter=raw.get("delimiter", ";"),
        drop_columns=tuple(raw.get("drop_columns", ())),
        strategies=strategies,
        discretizers=discretizers,
        generators=generators,
        eps_pairs=tuple(eps_pairs),
        delta=delta,
        bins=bins,
        n_runs=n_runs,
        target_mode=target_mode,
        master_seed=int(raw.get("master_seed", 0)),
        provided_bounds=bounds,
        kmeans_iters=int(raw.get("kmeans_iters", 5)),
        privtree_max_depth=int(raw.get("privtree_max_depth", 20)),
        privbayes_k=int(raw.get("privbayes_k", 2)),
        extraction_m=int(raw.get("extraction_m", 32)),
        extraction_beta=float(raw.get("extraction_beta", 1e-9)),
        output_dir=str(out_dir),
    )


def load_config(path) -> ExperimentConfig:
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"<root>: not valid JSON ({exc})") from None
    return config_from_dict(raw, base_dir=Path(path).resolve().parent)


def full_dataset_bounds(table: Table) -> tuple[tuple[float, float], ...]:
    """Full-range bounds including every record; the 'provided' default."""
    return tuple(
        (float(table.column(c).min()), float(table.column(c).max())) for c in range(table.d)
    )


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def fingerprint(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode()).hexdigest()


@dataclass(frozen=True)
class Cell:
    strategy: str
    discretizer: str
    generator: str
    eps_pre: float
    eps_model: float

    def to_json(self) -> dict:
        return asdict(self)


def cells_of(cfg: ExperimentConfig) -> list[Cell]:
    return [
        Cell(s, d, g, pre, model)
        for pre, model in cfg.eps_pairs
        for g in cfg.generators
        for d in cfg.discretizers
        for s in cfg.strategies
    ]


def cell_fingerprint(cfg: ExperimentConfig, cell: Cell) -> str:
    payload = {
        "config": {
            k: v
            for k, v in cfg.to_json().items()
            if k not in ("output_dir", "strategies", "discretizers", "generators", "eps_pairs")
        },
        "cell": cell.to_json(),
    }
    return fingerprint(payload)


def game_config_for(cfg: ExperimentConfig, cell: Cell, bounds, n_jobs: int = 1) -> GameConfig:
    return GameConfig(
        strategy=cell.strategy,
        discretizer=DiscretizerConfig(
            cell.discretizer, cfg.bins, cfg.kmeans_iters, cfg.privtree_max_depth
        ),
        generator=cell.generator,
        budget=budget_for(cell.strategy, cell.eps_pre, cell.eps_model, cfg.delta),
        provided_bounds=bounds,
        extraction=ExtractionConfig(cfg.extraction_m, cfg.extraction_beta),
        n_runs=cfg.n_runs,
        master_seed=cfg.master_seed,
        n_jobs=n_jobs,
        privbayes_k=cfg.privbayes_k,
    )


def run_cell(table: Table, cfg: ExperimentConfig, cell: Cell, target, bounds, n_jobs=1) -> dict:
    game_cfg = game_config_for(cfg, cell, bounds, n_jobs)
    result = run_shadow_game(table, game_cfg, target)
    return {
        "strategy": cell.strategy,
        "discretizer": cell.discretizer,
        "generator": cell.generator,
        "eps_pre": cell.eps_pre,
        "eps_model": cell.eps_model,
        "auc": result.auc,
        "n_runs": cfg.n_runs,
        "cell_fingerprint": cell_fingerprint(cfg, cell),
        "ledger": result.ledger_summary,
        "audit": result.exemplar_audit,
    }


def _prepare(cfg: ExperimentConfig):
    table = load_csv(cfg.dataset_path, cfg.delimiter, cfg.drop_columns)
    bounds = cfg.provided_bounds or full_dataset_bounds(table)
    target = select_target(table, cfg.target_mode)
    return table, bounds, target


def run_experiment(cfg: ExperimentConfig, n_jobs: int = 1, include_features: bool = False) -> dict:
    """Evaluate every requested cell and assemble one result record."""
    table, bounds, target = _prepare(cfg)
    records = []
    failures = []
    for cell in cells_of(cfg):
        logger.info(
            "cell %s/%s/%s eps=(%g, %g)",
            cell.strategy, cell.discretizer, cell.generator, cell.eps_pre, cell.eps_model,
        )
        try:
            records.append(run_cell(table, cfg, cell, target, bounds, n_jobs))
        except Exception as exc:  # collect and keep going; exit code reflects it
            logger.error("cell failed: %s", exc)
            failures.append({"cell": cell.to_json(), "error": str(exc)})
    return {
        "schema_version": SCHEMA_VERSION,
        "config": cfg.to_json(),
        "config_fingerprint": fingerprint(cfg.to_json()),
        "master_seed": cfg.master_seed,
        "target": target.to_json(),
        "provided_bounds": [list(b) for b in bounds],
        "cells": records,
        "failures": failures,
    }


def write_result(result: dict, path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(result, fh, indent=2, sort_keys=True)
        fh.write("\n")


def plot_results(records: list[dict], out_dir) -> list[Path]:
    """One grouped bar chart per (generator, eps pair) across records."""
    if not records:
        raise ConfigError("cells: no result records to plot")
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    panels: dict[tuple, dict] = {}
    for rec in records:
        key = (rec["generator"], rec["eps_pre"], rec["eps_model"])
        panels.setdefault(key, {})[(rec["discretizer"], rec["strategy"])] = rec["auc"]
    written = []
    for (gen, pre, model), values in sorted(panels.items()):
        groups = sorted({g for g, _ in values}, key=list(DISCRETIZER_KINDS).index)
        series = sorted({s for _, s in values}, key=list(STRATEGIES).index)
        svg = grouped_bar_svg(
            groups, series, values,
            title=f"{gen}: discretizer eps={pre:g}, model eps={model:g}",
        )
        path = out_dir / f"chart_{gen}_pre{pre:g}_model{model:g}.svg"
        path.write_text(svg)
        written.append(path)
    return written


def sweep(cfg: ExperimentConfig, out_dir, n_jobs: int = 1) -> tuple[list[Path], list[dict]]:
    """Run every cell to its own result file; skip cells already on disk.

    Cell files are named by fingerprint, so a re-invocation after an
    interrupt resumes with the incomplete cells only.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    table, bounds, target = _prepare(cfg)
    written = []
    failures = []
    for cell in cells_of(cfg):
        fp = cell_fingerprint(cfg, cell)
        path = out_dir / f"cell_{fp[:16]}.json"
        if path.exists():
            try:
                existing = json.loads(path.read_text())
                if existing.get("cell_fingerprint") == fp:
                    logger.info("skipping completed cell %s", path.name)
                    written.append(path)
                    continue
            except (json.JSONDecodeError, OSError):
                pass  # partial file from an interrupt; recompute
        try:
            record = run_cell(table, cfg, cell, target, bounds, n_jobs)
        except Exception as exc:
            logger.error("cell failed: %s", exc)
            failures.append({"cell": cell.to_json(), "error": str(exc)})
            continue
        tmp = path.with_suffix(".json.tmp")
        with open(tmp, "w") as fh:
            json.dump(record, fh, indent=2, sort_keys=True)
            fh.write("\n")
        os.replace(tmp, path)
        written.append(path)
    return written, failures


# ---------------------------------------------------------------------------
# figure presets mirroring the reported experiment grids


def figure1_config(dataset_path, n_runs: int = 200, master_seed: int = 0, **overrides) -> dict:
    """Outside target, eps (1,1), all strategies x discretizers x generators."""
    cfg = {
        "schema_version": SCHEMA_VERSION,
        "dataset_path": str(dataset_path),
        "strategies": list(STRATEGIES),
        "discretizers": list(DISCRETIZER_KINDS),
        "generators": ["privbayes", "mst"],
        "eps_pairs": [[1.0, 1.0]],
        "target_mode": "outside",
        "n_runs": n_runs,
        "master_seed": master_seed,
    }
    cfg.update(overrides)
    return cfg


def figure23_config(dataset_path, n_runs: int = 200, master_seed: int = 0, **overrides) -> dict:
    """Outside target at the high-budget eps grid."""
    cfg = figure1_config(dataset_path, n_runs, master_seed)
    cfg["eps_pairs"] = [
        [1.0, 100.0], [100.0, 1.0], [100.0, 100.0],
        [1.0, 1000.0], [1000.0, 1.0], [1000.0, 1000.0],
    ]
    cfg.update(overrides)
    return cfg


def figure4_config(dataset_path, n_runs: int = 200, master_seed: int = 0, **overrides) -> dict:
    """Inside target across matched eps pairs."""
    cfg = figure1_config(dataset_path, n_runs, master_seed)
    cfg["target_mode"] = "inside"
    cfg["eps_pairs"] = [[1.0, 1.0], [100.0, 100.0], [1000.0, 1000.0]]
    cfg.update(overrides)
    return cfg
