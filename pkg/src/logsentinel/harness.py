"""Seeded evaluation loop: 60/20/20 splits, k-fold CV, averaging, search.

The metric recorded for one (model, seed) pair is the mean of k-fold CV
over the union of that seed's train and test partitions; the validation
partition is held back.  Per-seed results are keyed by seed, so running
seeds on several threads cannot change the report.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import models as M
from .dataset import Dataset
from .errors import SchemaMismatch, SingleClass, TooFewRows

DEFAULT_SEEDS = tuple(range(1, 51))
COMPOSITION_NOTE = (
    "Per-seed metrics are the mean of k-fold cross-validation over the train+test "
    "rows of that seed's 60/20/20 split; the validation rows are reserved."
)
METRIC_NAMES = ("accuracy", "precision", "recall", "f1")


class BudgetTooSmall(UserWarning):
    """No search candidate finished inside the time budget."""


@dataclass(frozen=True)
class SplitSpec:
    seed: int
    train: float = 0.6
    val: float = 0.2
    test: float = 0.2

    def __post_init__(self):
        parts = (self.train, self.val, self.test)
        if any(p <= 0 for p in parts) or abs(sum(parts) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must be positive and sum to 1, got {parts}")


def split_indices(n, spec: SplitSpec):
    """Positions (train, val, test) into a length-n row list."""
    if n < 5:
        raise TooFewRows(f"need at least 5 unique rows to split, got {n}")
    perm = np.random.default_rng(spec.seed).permutation(n)
    n_train = math.floor(spec.train * n)
    n_test = math.floor(spec.test * n)
    train = perm[:n_train]
    test = perm[n_train:n_train + n_test]
    val = perm[n_train + n_test:]
    return train, val, test


def split(ds: Dataset, spec: SplitSpec):
    """Deduplicate, shuffle and cut into (train, val, test) datasets.

    Train takes the first share of the shuffled rows, test the next and
    validation the remainder.
    """
    unique = ds.unique_rows()
    train, val, test = split_indices(len(unique), spec)
    return unique.take(train), unique.take(val), unique.take(test)


@dataclass
class CVResult:
    folds: list
    mean: M.Metrics
    missing: int = 0


def mean_metrics(items) -> M.Metrics:
    items = list(items)
    return M.Metrics(*(float(np.mean([getattr(m, name) for m in items])) for name in METRIC_NAMES))


def kfold_cv(spec: M.ModelSpec, ds: Dataset, k: int = 5, seed: int = 0, features=None) -> CVResult:
    """Shuffled, unstratified k-fold CV with contiguous folds.

    Folds whose training part holds a single class are recorded as None and
    left out of the mean.
    """
    features = ds.feature_names() if features is None else list(features)
    X, y = ds.to_xy(features)
    n = X.shape[0]
    if k < 2 or k > n:
        raise ValueError(f"k must lie in [2, n={n}], got {k}")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    results = []
    for i, held in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        if np.unique(y[train]).size < 2:
            results.append(None)
            continue
        model = M.fit(spec, X[train], y[train], features)
        results.append(M.compute_metrics(y[held], M.predict(model, X[held])))
    done = [r for r in results if r is not None]
    missing = len(results) - len(done)
    if not done:
        raise SingleClass("every training fold holds a single class")
    if missing:
        warnings.warn(f"{missing} of {k} folds skipped: single-class training fold", stacklevel=2)
    return CVResult(results, mean_metrics(done), missing)


def thread_count() -> int:
    raw = os.environ.get("LOGSENTINEL_THREADS", "0").strip() or "0"
    try:
        value = int(raw)
    except ValueError:
        raise ValueError(f"LOGSENTINEL_THREADS must be an integer, got {raw!r}") from None
    if value < 0:
        raise ValueError("LOGSENTINEL_THREADS must be >= 0")
    return value if value > 0 else (os.cpu_count() or 1)


@dataclass
class ModelRow:
    spec: M.ModelSpec
    per_seed: dict  # seed -> Metrics
    missing_folds: int = 0

    @property
    def mean(self) -> M.Metrics:
        return mean_metrics(self.per_seed[s] for s in sorted(self.per_seed))


@dataclass
class SearchResult:
    spec: M.ModelSpec
    metrics: M.Metrics
    evaluated: int
    fallback: bool = False
    history: list = field(default_factory=list)  # (spec, score) per finished candidate


@dataclass
class EvalReport:
    rows: list
    config: dict
    automl: SearchResult | None = None


def _seed_task(specs, ds, seed, k, master_seed, ratios, features):
    train, _val, test = split(ds, SplitSpec(seed, *ratios))
    pool = Dataset(train.columns, train.rows + test.rows)
    out = []
    for position, spec in enumerate(specs):
        model_spec = spec.with_seed(M.derive_seed(master_seed, seed, position, spec.seed))
        cv_seed = M.derive_seed(master_seed, seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = kfold_cv(model_spec, pool, k, cv_seed, features)
        out.append((res.mean, res.missing))
    return seed, out


def run_seeds(specs, ds: Dataset, seeds=DEFAULT_SEEDS, k: int = 5, master_seed: int = 0,
              ratios=(0.6, 0.2, 0.2), threads: int | None = None, features=None) -> EvalReport:
    specs = list(specs)
    seeds = [int(s) for s in seeds]
    if len(set(seeds)) != len(seeds):
        raise ValueError("seeds must be distinct")
    threads = thread_count() if threads is None else max(1, int(threads))
    args = (k, master_seed, tuple(ratios), features)
    if threads == 1 or len(seeds) == 1:
        results = [_seed_task(specs, ds, s, *args) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda s: _seed_task(specs, ds, s, *args), seeds))
    rows = [ModelRow(spec, {}) for spec in specs]
    for seed, out in results:
        for row, (metrics, missing) in zip(rows, out):
            row.per_seed[seed] = metrics
            row.missing_folds += missing
    config = {
        "seeds": _seed_range_text(seeds),
        "ratios": "/".join(f"{r:g}" for r in ratios),
        "k": k,
        "master_seed": master_seed,
    }
    return EvalReport(rows, config)


def _seed_range_text(seeds):
    ordered = sorted(seeds)
    if ordered == list(range(ordered[0], ordered[-1] + 1)):
        return f"{ordered[0]}:{ordered[-1]}"
    return ",".join(str(s) for s in ordered)


# -- search ---------------------------------------------------------------

SEARCH_FAMILIES = ("gbdt_limited_depth", "random_forest", "logistic", "decision_tree")


def _log_uniform(rng, lo, hi):
    return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))


def sample_candidate(family, rng) -> dict:
    """Hyperparameters drawn from the documented per-family search ranges.

    gbdt_limited_depth: n_rounds in [50, 400], learning_rate log-uniform in
    [0.03, 0.3], max_depth in {1, 2, 3}.
    random_forest: n_trees in [50, 200], max_depth in {None, 3, 5, 8},
    max_features in {sqrt, all}, min_samples_split in [2, 10].
    logistic: l2 log-uniform in [1e-3, 1e2].
    decision_tree: max_depth in {None, 2..10}, min_samples_split in [2, 20].
    """
    if family == "gbdt_limited_depth":
        return {"n_rounds": int(rng.integers(50, 401)),
                "learning_rate": round(_log_uniform(rng, 0.03, 0.3), 6),
                "max_depth": int(rng.integers(1, 4))}
    if family == "random_forest":
        depth = [None, 3, 5, 8][int(rng.integers(0, 4))]
        return {"n_trees": int(rng.integers(50, 201)), "max_depth": depth,
                "max_features": ["sqrt", "all"][int(rng.integers(0, 2))],
                "min_samples_split": int(rng.integers(2, 11))}
    if family == "logistic":
        return {"l2": round(_log_uniform(rng, 1e-3, 1e2), 6)}
    if family == "decision_tree":
        depth = [None, 2, 3, 4, 5, 6, 7, 8, 9, 10][int(rng.integers(0, 10))]
        return {"max_depth": depth, "min_samples_split": int(rng.integers(2, 21))}
    raise ValueError(family)


def candidate_sequence(seed: int, count: int):
    """The first ``count`` search candidates for a seed."""
    rng = np.random.default_rng(seed)
    return [M.ModelSpec(SEARCH_FAMILIES[i % len(SEARCH_FAMILIES)],
                        sample_candidate(SEARCH_FAMILIES[i % len(SEARCH_FAMILIES)], rng), seed)
            for i in range(count)]


def automl_search(ds: Dataset, budget_seconds: float = 60.0, k: int = 5, seed: int = 0,
                  max_candidates: int | None = None, scoring: str = "f1",
                  features=None, clock=time.monotonic) -> SearchResult:
    """Budgeted random search scored by mean k-fold CV.

    A candidate counts only if it finishes inside the budget.  Ties keep
    the earlier candidate.
    """
    if budget_seconds <= 0:
        raise ValueError("budget must be positive")
    if scoring not in METRIC_NAMES:
        raise ValueError(f"unknown scoring metric {scoring!r}")
    limit = 200 if max_candidates is None else min(200, int(max_candidates))
    start = clock()
    best = None
    history = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        for spec in candidate_sequence(seed, limit):
            if clock() - start >= budget_seconds:
                break
            res = kfold_cv(spec, ds, k, seed, features)
            if clock() - start > budget_seconds:
                break
            score = getattr(res.mean, scoring)
            history.append((spec, score))
            if best is None or score > getattr(best[1], scoring):
                best = (spec, res.mean)
    if best is None:
        warnings.warn("no search candidate finished within the budget; "
                      "falling back to the default gbdt_limited_depth", BudgetTooSmall, stacklevel=2)
        spec = M.ModelSpec("gbdt_limited_depth", {}, seed)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            res = kfold_cv(spec, ds, k, seed, features)
        return SearchResult(spec, res.mean, 0, True, history)
    return SearchResult(best[0], best[1], len(history), False, history)


# -- report ---------------------------------------------------------------

def percent(x: float) -> str:
    return f"{100.0 * x:.2f}%"


def _table(report: EvalReport):
    header = ["Model", "Avg Accuracy", "Avg Precision", "Avg Recall", "Avg F1"]
    body = []
    for row in report.rows:
        m = row.mean
        body.append([row.spec.label()] + [percent(getattr(m, n)) for n in METRIC_NAMES])
    if report.automl is not None:
        a = report.automl
        tag = " [default fallback]" if a.fallback else ""
        body.append([f"Search best: {a.spec.label()}{tag}"]
                    + [percent(getattr(a.metrics, n)) for n in METRIC_NAMES])
    return header, body


def _footer(report: EvalReport):
    lines = ["Configuration: " + ", ".join(f"{k}={v}" for k, v in report.config.items())]
    lines.append(COMPOSITION_NOTE)
    missing = sum(r.missing_folds for r in report.rows)
    if missing:
        lines.append(f"Skipped single-class training folds: {missing}")
    if report.rows:
        lines.append("Kernel SVM uses an RBF kernel; depth-limited gradient-boosted trees "
                     "stand in for the original search system's best estimator.")
    if report.automl is not None:
        lines.append(f"Search candidates evaluated: {report.automl.evaluated}")
    return lines


def format_report(report: EvalReport, fmt: str = "markdown") -> str:
    header, body = _table(report)
    if fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(body)
        for line in _footer(report):
            writer.writerow(["# " + line])
        return buf.getvalue()
    if fmt != "markdown":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = ["| " + " | ".join(header) + " |", "|" + "---|" * len(header)]
    lines += ["| " + " | ".join(row) + " |" for row in body]
    lines.append("")
    lines += _footer(report)
    return "\n".join(lines) + "\n"


def per_seed_csv(report: EvalReport) -> str:
    """Long-form per-seed metrics, full precision."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "seed", *METRIC_NAMES])
    for row in report.rows:
        for seed in sorted(row.per_seed):
            m = row.per_seed[seed]
            writer.writerow([row.spec.family, seed, *(repr(getattr(m, n)) for n in METRIC_NAMES)])
    return buf.getvalue()


def report_to_json(report: EvalReport) -> str:
    doc = {
        "format": "logsentinel-eval",
        "version": 1,
        "config": report.config,
        "rows": [
            {"spec": row.spec.as_dict(), "missing_folds": row.missing_folds,
             "per_seed": {str(s): row.per_seed[s].as_dict() for s in sorted(row.per_seed)}}
            for row in report.rows
        ],
        "automl": None,
    }
    if report.automl is not None:
        a = report.automl
        doc["automl"] = {"spec": a.spec.as_dict(), "metrics": a.metrics.as_dict(),
                         "evaluated": a.evaluated, "fallback": a.fallback}
    return json.dumps(doc, indent=1) + "\n"


def _spec_from(d):
    return M.ModelSpec(d["family"], d["hyperparameters"], d["seed"])


def report_from_json(text: str) -> EvalReport:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaMismatch(f"evaluation document is not JSON: {exc}") from exc
    if doc.get("format") != "logsentinel-eval" or doc.get("version") != 1:
        raise SchemaMismatch("not a supported evaluation document")
    rows = [
        ModelRow(_spec_from(r["spec"]),
                 {int(s): M.Metrics(**m) for s, m in r["per_seed"].items()},
                 r["missing_folds"])
        for r in doc["rows"]
    ]
    automl = None
    if doc["automl"] is not None:
        a = doc["automl"]
        automl = SearchResult(_spec_from(a["spec"]), M.Metrics(**a["metrics"]),
                              a["evaluated"], a["fallback"])
    return EvalReport(rows, doc["config"], automl)
