"""Command-line front end: run experiments, sweep grids, plot, audit targets."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import experiment
from .attack import select_target
from .domains import ExtractionConfig, direct_domain, dp_domain, provided_domain
from .experiment import ConfigError, OUTPUT_DIR_ENV, load_config
from .mechanisms import RandomStream
from .tabular import load_csv


def _default_outdir() -> str:
    return os.environ.get(OUTPUT_DIR_ENV, ".")


def _add_dataset_args(p: argparse.ArgumentParser):
    p.add_argument("--dataset", required=True, help="CSV file with a header row")
    p.add_argument("--delimiter", default=";", help="field delimiter (default ';')")
    p.add_argument(
        "--drop-columns", default="", help="comma-separated columns to drop (e.g. a label)"
    )


def _load_table(args):
    drop = tuple(c for c in args.drop_columns.split(",") if c)
    return load_csv(args.dataset, args.delimiter, drop)


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out_dir = Path(args.output_dir or cfg.output_dir or _default_outdir())
    result = experiment.run_experiment(cfg, n_jobs=args.jobs)
    result_path = out_dir / f"results_{result['config_fingerprint'][:16]}.json"
    experiment.write_result(result, result_path)
    print(f"wrote {result_path}")
    if result["cells"]:
        charts = experiment.plot_results(result["cells"], out_dir)
        for c in charts:
            print(f"wrote {c}")
    for failure in result["failures"]:
        print(f"FAILED cell {failure['cell']}: {failure['error']}", file=sys.stderr)
    return 1 if result["failures"] else 0


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    if args.grid:
        with open(args.grid) as fh:
            grid = json.load(fh)
        raw = cfg.to_json()
        raw.pop("schema_version", None)
        for key in ("strategies", "discretizers", "generators", "eps_pairs"):
            if key in grid:
                raw[key] = grid[key]
        if all(not grid.get(k) for k in ("strategies", "discretizers", "generators", "eps_pairs")):
            print("empty grid: nothing to do")
            return 0
        cfg = experiment.config_from_dict(raw)
    out_dir = Path(args.output_dir or cfg.output_dir or _default_outdir())
    written, failures = experiment.sweep(cfg, out_dir, n_jobs=args.jobs)
    for path in written:
        print(f"cell {path}")
    for failure in failures:
        print(f"FAILED cell {failure['cell']}: {failure['error']}", file=sys.stderr)
    return 1 if failures else 0


def cmd_plot(args) -> int:
    records = []
    for path in args.results:
        with open(path) as fh:
            payload = json.load(fh)
        records.extend(payload["cells"] if "cells" in payload else [payload])
    charts = experiment.plot_results(records, args.output_dir or _default_outdir())
    for c in charts:
        print(f"wrote {c}")
    return 0


def cmd_select_target(args) -> int:
    table = _load_table(args)
    target = select_target(table, args.mode)
    print(json.dumps(target.to_json(), indent=2))
    return 0


def cmd_extract_domain(args) -> int:
    table = _load_table(args)
    rng = RandomStream(args.seed)
    out = {}
    for strategy in args.strategies.split(","):
        if strategy == "provided":
            dom = provided_domain(
                [(float(table.column(c).min()), float(table.column(c).max()))
                 for c in range(table.d)]
            )
        elif strategy == "direct":
            dom = direct_domain(table)
        elif strategy == "dp":
            dom = dp_domain(table, args.eps, ExtractionConfig(), rng.child("extract"))
        else:
            print(f"unknown strategy {strategy!r}", file=sys.stderr)
            return 2
        out[strategy] = [[b.lo, b.hi] for b in dom.bounds]
    print(json.dumps(out, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="domainleak",
        description="DP tabular synthesis pipelines and the domain-extraction privacy game",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run every cell of a config file, write results + charts")
    p_run.add_argument("config", help="experiment config (JSON)")
    p_run.add_argument("--output-dir", default=None, help=f"default ${OUTPUT_DIR_ENV} or '.'")
    p_run.add_argument("--jobs", type=int, default=1, help="parallel shadow-run workers")
    p_run.set_defaults(fn=cmd_run)

    p_sweep = sub.add_parser("sweep", help="resumable per-cell sweep over a grid")
    p_sweep.add_argument("config", help="base experiment config (JSON)")
    p_sweep.add_argument("--grid", default=None, help="JSON grid overriding the cell lists")
    p_sweep.add_argument("--output-dir", default=None)
    p_sweep.add_argument("--jobs", type=int, default=1)
    p_sweep.set_defaults(fn=cmd_sweep)

    p_plot = sub.add_parser("plot", help="render grouped bar charts from result files")
    p_plot.add_argument("results", nargs="+", help="result or cell JSON files")
    p_plot.add_argument("--output-dir", default=None)
    p_plot.set_defaults(fn=cmd_plot)

    p_target = sub.add_parser("select-target", help="print the chosen attack target")
    _add_dataset_args(p_target)
    p_target.add_argument("--mode", choices=("outside", "inside"), default="outside")
    p_target.set_defaults(fn=cmd_select_target)

    p_domain = sub.add_parser("extract-domain", help="print bounds per strategy for audit")
    _add_dataset_args(p_domain)
    p_domain.add_argument("--strategies", default="provided,direct,dp")
    p_domain.add_argument("--eps", type=float, default=0.5, help="budget for the dp strategy")
    p_domain.add_argument("--seed", type=int, default=0)
    p_domain.set_defaults(fn=cmd_extract_domain)

    return parser


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
