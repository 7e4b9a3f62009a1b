"""Shadow-model membership-inference game.

Two worlds are instantiated: IN trains on the full dataset, OUT on the
dataset minus the target record. Each world runs N independent pipeline
executions (domain extraction -> discretization -> generator -> sampling),
and each synthetic dataset is summarized by per-column (min, max, mean,
median, std). Even-indexed runs train a random-forest classifier to
distinguish the worlds, odd-indexed runs are scored, and attack success is
the rank AUC of those scores.

Every run owns a random stream derived from (master seed, world, run
index), so results are byte-identical regardless of execution order or
worker count.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .discretizers import DiscretizerConfig, build_edges, decode, discretize
from .domains import ExtractionConfig, direct_domain, dp_domain, provided_domain
from .forest import RandomForest
from .mechanisms import BudgetLedger, PrivacyBudget, RandomStream
from .tabular import DataError, DiscreteTable, Domain, Table, mean_pairwise_distance
from . import mst as _mst
from . import privbayes as _privbayes

WORLD_IN = "in"
WORLD_OUT = "out"
TARGET_MODES = ("outside", "inside")


class PipelineError(RuntimeError):
    """A shadow run failed; the message names the failing stage."""


@dataclass(frozen=True)
class TargetSelection:
    """Chosen attack target: row index, mode, and which columns fall outside
    the remaining records' ranges."""

    index: int
    mode: str
    outside_flags: tuple[bool, ...]
    mean_distance: float

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "mode": self.mode,
            "outside_columns": [int(i) for i in np.flatnonzero(self.outside_flags)],
            "mean_distance": self.mean_distance,
        }


def _range_flags(table: Table, row: int) -> tuple[np.ndarray, np.ndarray]:
    """(outside, strictly_inside) flags of row vs the other records' ranges."""
    others = np.delete(table.values, row, axis=0)
    lo = others.min(axis=0)
    hi = others.max(axis=0)
    v = table.values[row]
    outside = (v < lo) | (v > hi)
    inside = (v > lo) & (v < hi)
    return outside, inside


def select_target(table: Table, mode: str) -> TargetSelection:
    """Pick the most outlying record compatible with the requested mode.

    Records are ranked by mean standardized distance to all others; the
    highest-ranked one that is (mode=outside) strictly beyond the remaining
    records' range in at least one column, or (mode=inside) strictly within
    it in every column, is returned.
    """
    if mode not in TARGET_MODES:
        raise DataError(f"unknown target mode {mode!r}")
    if table.n < 3:
        raise DataError("need at least 3 records to select a target")
    distances = mean_pairwise_distance(table)
    # rank on distances quantized at 1e-9 so float jitter cannot order true
    # ties; tied candidates break toward the later row, for a total order
    order = np.lexsort((-np.arange(table.n), -np.round(distances, 9)))
    near_misses = []
    for row in order:
        outside, inside = _range_flags(table, int(row))
        ok = outside.any() if mode == "outside" else inside.all()
        if ok:
            return TargetSelection(int(row), mode, tuple(bool(f) for f in outside), float(distances[row]))
        if len(near_misses) < 5:
            near_misses.append(
                f"row {int(row)} (distance {distances[row]:.3f}, "
                f"{int(outside.sum())} columns outside)"
            )
    raise DataError(
        f"no record satisfies target mode {mode!r}; closest candidates: "
        + "; ".join(near_misses)
    )


def naive_features(synth: Table) -> np.ndarray:
    """Per column (min, max, mean, median, std), column-major, length 5*d.

    Median is the lower-middle element for even n and std is the population
    (1/n) convention, so every statistic is a deterministic function of the
    sorted column.
    """
    if synth.n < 1:
        raise DataError("need at least one row")
    out = np.empty(5 * synth.d)
    for c in range(synth.d):
        col = np.sort(synth.column(c))
        n = col.size
        out[5 * c : 5 * c + 5] = (
            col[0],
            col[-1],
            col.mean(),
            col[(n - 1) // 2],
            col.std(),
        )
    return out


def auc(scores, labels) -> float:
    """Mann-Whitney rank AUC; ties count one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DataError("AUC needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(scores.size, dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < scores.size:
        j = i
        while j + 1 < scores.size and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum = ranks[labels == 1].sum()
    u = rank_sum - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


@dataclass
class Classifier:
    """Random forest plus the training-half standardization that feeds it."""

    mean: np.ndarray
    std: np.ndarray
    forest: RandomForest

    def scores(self, features: np.ndarray) -> np.ndarray:
        z = (np.asarray(features, dtype=np.float64) - self.mean) / self.std
        return self.forest.predict_proba(z)


def train_classifier(features, labels, rng: RandomStream, n_trees: int = 100) -> Classifier:
    """Standardize by training statistics and fit the membership forest."""
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if np.unique(y).size < 2:
        raise DataError("classifier training needs both labels present")
    mean = X.mean(axis=0)
    std = X.std(axis=0)
    std = np.where(std > 0, std, 1.0)
    forest = RandomForest(n_trees=n_trees).fit((X - mean) / std, y, rng)
    return Classifier(mean, std, forest)


# --------------------------------------------------------------------------
# pipeline


def generate_privbayes(dt, domain, edges, budget, rng, ledger, n_out, k=2):
    synth, net = _privbayes.fit_and_sample(
        dt, budget.eps_model, rng, ledger, k=k, n_out=n_out
    )
    return synth, {"network": net.to_json()}

def generate_mst(dt, domain, edges, budget, rng, ledger, n_out):
    synth, model = _mst.fit_and_sample(
        dt, budget.eps_model, budget.delta, rng, ledger, n_out=n_out
    )
    return synth, {"tree": model.to_json()}


GENERATORS = {
    "privbayes": generate_privbayes,
    "mst": generate_mst,
}


@dataclass(frozen=True)
class GameConfig:
    """One cell of the privacy game: a full pipeline choice plus run counts."""

    strategy: str  # provided | direct | dp
    discretizer: DiscretizerConfig
    generator: str
    budget: PrivacyBudget
    provided_bounds: tuple[tuple[float, float], ...] | None = None
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    n_runs: int = 200
    master_seed: int = 0
    n_jobs: int = 1
    privbayes_k: int = 2

    def __post_init__(self):
        if self.strategy not in ("provided", "direct", "dp"):
            raise DataError(f"unknown strategy {self.strategy!r}")
        if self.strategy == "provided" and not self.provided_bounds:
            raise DataError("strategy 'provided' needs provided_bounds")
        if self.generator not in GENERATORS and not callable(self.generator):
            raise DataError(f"unknown generator {self.generator!r}")
        if self.n_runs < 2:
            raise DataError("need at least 2 shadow runs per world")


def budget_for(strategy: str, eps_pre: float, eps_model: float, delta: float) -> PrivacyBudget:
    """Pre-processing budget split: halved between extraction and
    discretization when extraction is DP, otherwise all to discretization."""
    if strategy == "dp":
        return PrivacyBudget(eps_pre / 2.0, eps_pre / 2.0, eps_model, delta)
    return PrivacyBudget(0.0, eps_pre, eps_model, delta)


def expected_stage_budgets(cfg: GameConfig) -> dict:
    """What the ledger must show after one run (uniform discretizer spends 0)."""
    return {
        "extract": cfg.budget.eps_extract if cfg.strategy == "dp" else 0.0,
        "disc": 0.0 if cfg.discretizer.kind == "uniform" else cfg.budget.eps_disc,
        "model": cfg.budget.eps_model,
    }


def verify_ledger(ledger: BudgetLedger, cfg: GameConfig, rel_tol: float = 1e-9) -> None:
    """Budget integrity check: stage totals equal the configured budgets and
    direct extraction carries its leak sentinel."""
    expected = expected_stage_budgets(cfg)
    delta = cfg.budget.delta or None
    for stage, want in expected.items():
        got, got_delta = ledger.stage_totals(stage, delta)
        if not math.isclose(got, want, rel_tol=rel_tol, abs_tol=1e-12):
            raise PipelineError(
                f"budget mismatch at stage {stage!r}: ledger {got}, configured {want}"
            )
        if stage == "model" and cfg.generator == "mst":
            if not math.isclose(got_delta, cfg.budget.delta, rel_tol=rel_tol, abs_tol=0.0):
                raise PipelineError(
                    f"delta mismatch: ledger {got_delta}, configured {cfg.budget.delta}"
                )
    if cfg.strategy == "direct" and not ledger.has_leak:
        raise PipelineError("direct extraction must record its NON-DP LEAK sentinel")


def extract_domain(table: Table, cfg: GameConfig, rng: RandomStream,
                   ledger: BudgetLedger | None = None) -> Domain:
    if cfg.strategy == "provided":
        return provided_domain(list(cfg.provided_bounds))
    if cfg.strategy == "direct":
        return direct_domain(table, ledger)
    return dp_domain(table, cfg.budget.eps_extract, cfg.extraction, rng, ledger)


def run_pipeline(
    table: Table, cfg: GameConfig, rng: RandomStream, collect_audit: bool = False
):
    """One end-to-end shadow run; returns (features, ledger, audit)."""
    ledger = BudgetLedger(cfg.budget)
    stage = "domain extraction"
    try:
        domain = extract_domain(table, cfg, rng.child("extract"), ledger)
        stage = "discretization"
        eps_col = cfg.budget.eps_disc / table.d
        edges = [
            build_edges(
                table.column(c), domain.bounds[c], cfg.discretizer, eps_col,
                rng.child("disc", c), ledger,
            )
            for c in range(table.d)
        ]
        dt = discretize(table, edges)
        stage = "generator"
        gen = GENERATORS.get(cfg.generator, cfg.generator)
        synth, audit = gen(dt, domain, edges, cfg.budget, rng.child("model"), ledger, table.n)
        stage = "decoding"
        if isinstance(synth, DiscreteTable):
            synth = decode(synth, edges, rng.child("decode"))
        stage = "feature extraction"
        features = naive_features(synth)
        stage = "budget verification"
        verify_ledger(ledger, cfg)
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(f"shadow run failed at stage {stage!r}: {exc}") from exc
    if collect_audit:
        audit = dict(audit)
        audit["domain"] = [[b.lo, b.hi] for b in domain.bounds]
        audit["edges"] = [be.edges.tolist() for be in edges]
        return features, ledger, audit
    return features, ledger, None


@dataclass
class GameResult:
    """Shadow-game outcome: AUC on the held-out halves plus audit payloads."""

    auc: float
    n_runs_per_world: int
    target: TargetSelection
    seeds: dict
    ledger_summary: dict
    features: dict  # world -> (n_runs, 5d) array
    exemplar_audit: dict
    test_scores: np.ndarray
    test_labels: np.ndarray

    def to_json(self, include_features: bool = False) -> dict:
        rec = {
            "auc": self.auc,
            "n_runs_per_world": self.n_runs_per_world,
            "target": self.target.to_json(),
            "seeds": self.seeds,
            "ledger": self.ledger_summary,
            "exemplar_audit": self.exemplar_audit,
        }
        if include_features:
            rec["features"] = {w: f.tolist() for w, f in self.features.items()}
        return rec


_WORKER: dict = {}


def _init_worker(tables: dict, cfg: GameConfig):
    _WORKER["tables"] = tables
    _WORKER["cfg"] = cfg


def _worker_run(task):
    world, index = task
    cfg = _WORKER["cfg"]
    rng = RandomStream(RandomStream.derive_seed(cfg.master_seed, world, index))
    feats, _, _ = run_pipeline(_WORKER["tables"][world], cfg, rng)
    return world, index, feats


def run_shadow_game(table: Table, cfg: GameConfig, target: TargetSelection | None = None) -> GameResult:
    """Play the full membership game for one pipeline configuration."""
    if target is None:
        target = select_target(table, "outside")
    worlds = {WORLD_IN: table, WORLD_OUT: table.drop_row(target.index)}
    n = cfg.n_runs
    feats: dict[str, np.ndarray] = {}
    seeds = {
        w: [RandomStream.derive_seed(cfg.master_seed, w, i) for i in range(n)]
        for w in (WORLD_IN, WORLD_OUT)
    }

    tasks = [(w, i) for w in (WORLD_IN, WORLD_OUT) for i in range(n)]
    results: dict[tuple[str, int], np.ndarray] = {}
    if cfg.n_jobs > 1:
        with ProcessPoolExecutor(
            max_workers=cfg.n_jobs, initializer=_init_worker, initargs=(worlds, cfg)
        ) as pool:
            for world, index, f in pool.map(_worker_run, tasks, chunksize=8):
                results[(world, index)] = f
    else:
        _init_worker(worlds, cfg)
        for task in tasks:
            world, index, f = _worker_run(task)
            results[(world, index)] = f
    for w in (WORLD_IN, WORLD_OUT):
        feats[w] = np.vstack([results[(w, i)] for i in range(n)])

    # exemplar run re-executed with audit payloads + ledger summary
    rng0 = RandomStream(seeds[WORLD_IN][0])
    _, ledger0, audit0 = run_pipeline(worlds[WORLD_IN], cfg, rng0, collect_audit=True)
    delta = cfg.budget.delta or None
    ledger_summary = {
        "stage_totals": {
            s: list(ledger0.stage_totals(s, delta)) for s in ("extract", "disc", "model")
        },
        "non_dp_leak": ledger0.has_leak,
        "entries": ledger0.to_json(),
    }

    train_X, train_y, test_X, test_y = split_runs(feats, n)
    clf = train_classifier(
        train_X, train_y, RandomStream(RandomStream.derive_seed(cfg.master_seed, "classifier"))
    )
    scores = clf.scores(test_X)
    return GameResult(
        auc=auc(scores, test_y),
        n_runs_per_world=n,
        target=target,
        seeds=seeds,
        ledger_summary=ledger_summary,
        features=feats,
        exemplar_audit=audit0,
        test_scores=scores,
        test_labels=test_y,
    )


def split_runs(feats: dict, n: int):
    """Even-indexed runs per world train the classifier, odd-indexed test it."""
    even = np.arange(0, n, 2)
    odd = np.arange(1, n, 2)
    train_X = np.vstack([feats[WORLD_IN][even], feats[WORLD_OUT][even]])
    train_y = np.concatenate([np.ones(even.size), np.zeros(even.size)]).astype(int)
    test_X = np.vstack([feats[WORLD_IN][odd], feats[WORLD_OUT][odd]])
    test_y = np.concatenate([np.ones(odd.size), np.zeros(odd.size)]).astype(int)
    return train_X, train_y, test_X, test_y
