"""Command-line entry point.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(the message names the failing stage).
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

from . import dataset as D
from . import filter_features, harness, projections, stats
from . import models as M
from .errors import ConfigError, IoFailure, LogSentinelError
from .log_ingest import FlatRecord, dump_jsonl, ingest_file

log = logging.getLogger("logsentinel")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: {message}")


# -- helpers --------------------------------------------------------------

def parse_seeds(text: str) -> list[int]:
    """``"1:50"`` is inclusive on both ends; ``"3,5,9"`` lists seeds."""
    text = str(text).strip()
    try:
        if ":" in text:
            lo, hi = (int(p) for p in text.split(":", 1))
            if hi < lo:
                raise ConfigError(f"empty seed range {text!r}")
            return list(range(lo, hi + 1))
        seeds = [int(p) for p in text.split(",") if p.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse seeds {text!r}") from None
    if not seeds:
        raise ConfigError("no seeds given")
    return seeds


def parse_params(items) -> dict:
    """``key=value`` pairs; values are read as JSON when possible."""
    out = {}
    for item in items or ():
        if "=" not in item:
            raise ConfigError(f"hyperparameter {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            out[key] = json.loads(raw)
        except json.JSONDecodeError:
            out[key] = raw
    return out


def _write_text(path, text):
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _emit(text, out):
    if out:
        _write_text(out, text)
    else:
        sys.stdout.write(text)


def _read_text(path):
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def _queries(path):
    return D.bundled_queries() if path is None else D.load_queries(path)


def _load_records(args):
    if args.records:
        records = []
        for number, line in enumerate(_read_text(args.records).splitlines(), start=1):
            if line.strip():
                try:
                    records.append(FlatRecord(json.loads(line)))
                except json.JSONDecodeError as exc:
                    raise IoFailure(f"{args.records}:{number}: not JSON: {exc}") from exc
        return records
    records, st = ingest_file(args.log, strict=args.strict)
    log.info("ingest: %d lines, %d queries, %d malformed", *st.as_tuple())
    return records


def _features(ds, names):
    return ds.feature_names() if not names else list(names)


def _spec(family, params, seed):
    try:
        return M.ModelSpec(family, params, seed)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def project_dataset(ds, method, seed=0, perplexity=30.0, iters=1000):
    X, y = ds.to_xy()
    Z, _, _ = projections.standardize(X)
    if method == "lda":
        return projections.lda(Z, y)
    if method == "pca":
        return projections.pca(Z, 2, y)
    if method == "tsne":
        return projections.tsne(Z, perplexity, iters, seed, y)
    raise ConfigError(f"unknown projection method {method!r}")


# -- subcommands ----------------------------------------------------------

def cmd_ingest(args):
    records, st = ingest_file(args.log, strict=args.strict)
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                dump_jsonl(records, fh)
        except OSError as exc:
            raise IoFailure(f"cannot write {args.out}: {exc}") from exc
    else:
        dump_jsonl(records, sys.stdout)
    print("total={} query={} malformed={}".format(*st.as_tuple()), file=sys.stderr)


def cmd_extract(args):
    texts = [args.filter] if args.filter is not None else [q.text for q in _queries(args.queries)]
    out = [filter_features.extract(t).columns() for t in texts]
    _emit("".join(json.dumps(row, ensure_ascii=False) + "\n" for row in out), args.out)


def cmd_build(args):
    ds, report = D.build_dataset(_load_records(args), _queries(args.queries))
    D.write_csv(ds, args.out)
    print(json.dumps(report.as_dict()), file=sys.stderr)


def cmd_select(args):
    ds = D.read_csv(args.dataset)
    report, reduced = stats.select_features(ds, args.alpha, args.yates)
    _emit(stats.format_report(report, args.format), args.report)
    if args.out:
        D.write_csv(reduced, args.out)


def cmd_project(args):
    ds = D.read_csv(args.dataset)
    e = project_dataset(ds, args.method, args.seed, args.perplexity, args.iters)
    _emit(projections.coords_csv(e), args.out)
    if args.svg:
        projections.scatter_svg(e, args.svg, args.seed)


def cmd_train(args):
    ds = D.read_csv(args.dataset)
    features = _features(ds, args.features)
    X, y = ds.to_xy(features)
    model = M.fit(_spec(args.family, parse_params(args.param), args.seed), X, y, features)
    _write_text(args.out, M.to_json(model) + "\n")


def _evaluate(ds, families, seeds, k, master_seed, ratios=(0.6, 0.2, 0.2)):
    specs = [_spec(f, {}, 0) for f in families]
    return harness.run_seeds(specs, ds, seeds, k, master_seed, ratios)


def cmd_evaluate(args):
    ds = D.read_csv(args.dataset)
    report = _evaluate(ds, args.families or M.FAMILIES, parse_seeds(args.seeds), args.k,
                       args.master_seed)
    if args.json:
        _write_text(args.json, harness.report_to_json(report))
    if args.per_seed:
        _write_text(args.per_seed, harness.per_seed_csv(report))
    _emit(harness.format_report(report, args.format), args.out)


def cmd_automl(args):
    ds = D.read_csv(args.dataset)
    res = harness.automl_search(ds, args.budget, args.k, args.seed, args.max_candidates,
                                args.scoring)
    doc = {"spec": res.spec.as_dict(), "metrics": res.metrics.as_dict(),
           "evaluated": res.evaluated, "fallback": res.fallback}
    _emit(json.dumps(doc, indent=1) + "\n", args.out)


def cmd_report(args):
    report = harness.report_from_json(_read_text(args.input))
    _emit(harness.format_report(report, args.format), args.out)


def cmd_synth(args):
    lines = D.synth_logs(_queries(args.queries), args.seed, args.collection, args.database)
    if args.out:
        D.write_lines(lines, args.out)
    else:
        sys.stdout.write("".join(line + "\n" for line in lines))


def cmd_replay_script(args):
    script = D.emit_replay_script(_queries(args.queries), None, args.collection, args.database)
    _emit(script, args.out)


# -- pipeline -------------------------------------------------------------

@dataclass
class RunConfig:
    """Settings for ``pipeline``; paths are relative to the config file."""

    out_dir: str = "out"
    log: str | None = None
    queries: str | None = None
    synth_seed: int = 1
    strict_ingest: bool = False
    alpha: float = 0.01
    yates: bool = False
    seeds: str = "1:50"
    ratios: list = field(default_factory=lambda: [0.6, 0.2, 0.2])
    k: int = 5
    master_seed: int = 0
    families: list = field(default_factory=lambda: list(M.FAMILIES))
    budget: float = 60.0
    max_candidates: int | None = None
    search_seed: int = 0
    stratify: bool = False
    projections: list = field(default_factory=lambda: ["lda", "pca", "tsne"])
    projection_seed: int = 0
    perplexity: float = 30.0
    tsne_iters: int = 1000
    svg: bool = False

    PATH_FIELDS = ("out_dir", "log", "queries")

    @classmethod
    def from_dict(cls, raw: dict) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError(f"unknown config keys {unknown}")
        cfg = cls(**raw)
        cfg.validate()
        return cfg

    def validate(self):
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        parse_seeds(self.seeds)
        if len(self.ratios) != 3:
            raise ConfigError("ratios must list train, val and test shares")
        try:
            harness.SplitSpec(0, *self.ratios)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not isinstance(self.k, int) or self.k < 2:
            raise ConfigError("k must be an integer >= 2")
        if self.budget <= 0:
            raise ConfigError("budget must be positive")
        if self.max_candidates is not None and self.max_candidates < 1:
            raise ConfigError("max_candidates must be >= 1")
        if self.stratify:
            raise ConfigError("stratified splitting is not supported; splits are unstratified")
        for fam in self.families:
            if fam not in M.FAMILIES:
                raise ConfigError(f"unknown family {fam!r}")
        for method in self.projections:
            if method not in ("lda", "pca", "tsne"):
                raise ConfigError(f"unknown projection method {method!r}")

    def echo(self) -> dict:
        """Non-path settings, as echoed into reports."""
        return {f.name: getattr(self, f.name) for f in fields(self)
                if f.name not in self.PATH_FIELDS}


def run_pipeline(cfg: RunConfig, base: Path) -> dict:
    def resolve(p):
        return None if p is None else (base / p)

    out = resolve(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    queries = _queries(resolve(cfg.queries))
    if cfg.log is not None:
        records, st = ingest_file(resolve(cfg.log), strict=cfg.strict_ingest)
    else:
        from .log_ingest import ingest_lines
        records, st = ingest_lines(D.synth_logs(queries, cfg.synth_seed), strict=cfg.strict_ingest)
    log.info("ingest: %d lines, %d queries, %d malformed", *st.as_tuple())

    written = {}
    ds, join_report = D.build_dataset(records, queries)
    D.write_csv(ds, out / "dataset.csv")
    written["dataset"] = out / "dataset.csv"

    sel, reduced = stats.select_features(ds, cfg.alpha, cfg.yates)
    _write_text(out / "selection.md", stats.format_report(sel, "markdown"))
    D.write_csv(reduced, out / "reduced.csv")
    written["selection"] = out / "selection.md"

    for method in cfg.projections:
        e = project_dataset(reduced, method, cfg.projection_seed, cfg.perplexity, cfg.tsne_iters)
        path = out / f"projection_{method}.csv"
        _write_text(path, projections.coords_csv(e))
        written[f"projection_{method}"] = path
        if cfg.svg:
            projections.scatter_svg(e, out / f"projection_{method}.svg", cfg.projection_seed)

    report = _evaluate(reduced, cfg.families, parse_seeds(cfg.seeds), cfg.k, cfg.master_seed,
                       tuple(cfg.ratios))
    report.automl = harness.automl_search(reduced, cfg.budget, cfg.k, cfg.search_seed,
                                          cfg.max_candidates)
    report.config = cfg.echo()
    _write_text(out / "evaluation.md", harness.format_report(report, "markdown"))
    _write_text(out / "per_seed.csv", harness.per_seed_csv(report))
    written["evaluation"] = out / "evaluation.md"
    return written


def cmd_pipeline(args):
    path = Path(args.config)
    try:
        raw = json.loads(_read_text(path))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not JSON: {exc}") from exc
    for key in ("out_dir", "max_candidates", "budget"):
        value = getattr(args, key)
        if value is not None:
            raw[key] = value
    try:
        cfg = RunConfig.from_dict(raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc
    base = path.parent
    if args.out_dir is not None:
        # a flag-supplied output directory is relative to the working directory
        cfg.out_dir = str(Path(args.out_dir).resolve())
    written = run_pipeline(cfg, base)
    for name, p in written.items():
        print(f"{name}: {p}")


# -- parser ---------------------------------------------------------------

def build_parser():
    p = _Parser(prog="logsentinel", description="NoSQL-injection detection from mongod logs")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def queries_opt(sp):
        sp.add_argument("--queries", help="labeled queries JSON (default: bundled corpus)")

    sp = sub.add_parser("ingest", help="log file -> flattened query records (JSON lines)")
    sp.add_argument("--log", required=True)
    sp.add_argument("--out")
    sp.add_argument("--strict", action="store_true")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("extract", help="filter features for one filter or a query file")
    sp.add_argument("--filter")
    queries_opt(sp)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_extract)

    sp = sub.add_parser("build", help="join records with labels into a dataset CSV")
    src = sp.add_mutually_exclusive_group(required=True)
    src.add_argument("--log")
    src.add_argument("--records")
    queries_opt(sp)
    sp.add_argument("--strict", action="store_true")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_build)

    sp = sub.add_parser("select", help="significance tests and reduced dataset")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--alpha", type=float, default=0.01)
    sp.add_argument("--yates", action="store_true")
    sp.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    sp.add_argument("--report", help="write the report here instead of standard output")
    sp.add_argument("--out", help="reduced dataset CSV")
    sp.set_defaults(func=cmd_select)

    sp = sub.add_parser("project", help="LDA, PCA or t-SNE coordinates")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--method", choices=("lda", "pca", "tsne"), required=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--perplexity", type=float, default=30.0)
    sp.add_argument("--iters", type=int, default=1000)
    sp.add_argument("--out")
    sp.add_argument("--svg")
    sp.set_defaults(func=cmd_project)

    sp = sub.add_parser("train", help="fit one model and save it as JSON")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--family", choices=M.FAMILIES, required=True)
    sp.add_argument("--param", action="append", metavar="KEY=VALUE")
    sp.add_argument("--features", nargs="+")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("evaluate", help="multi-seed cross-validated evaluation")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--seeds", default="1:50")
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--master-seed", type=int, default=0)
    sp.add_argument("--families", nargs="+", choices=M.FAMILIES)
    sp.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    sp.add_argument("--json", help="also save the full report as JSON")
    sp.add_argument("--per-seed", help="also save per-seed metrics CSV")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_evaluate)

    sp = sub.add_parser("automl", help="budgeted model search")
    sp.add_argument("--dataset", required=True)
    sp.add_argument("--budget", type=float, default=60.0)
    sp.add_argument("--max-candidates", type=int)
    sp.add_argument("--k", type=int, default=5)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--scoring", choices=harness.METRIC_NAMES, default="f1")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_automl)

    sp = sub.add_parser("report", help="render a saved evaluation JSON")
    sp.add_argument("--input", required=True)
    sp.add_argument("--format", choices=("markdown", "csv"), default="markdown")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_report)

    sp = sub.add_parser("synth", help="synthetic mongod log for labeled queries")
    queries_opt(sp)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--collection", default="users")
    sp.add_argument("--database", default="test")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("replay-script", help="mongosh script replaying labeled queries")
    queries_opt(sp)
    sp.add_argument("--collection", default="users")
    sp.add_argument("--database", default="test")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_replay_script)

    sp = sub.add_parser("pipeline", help="run every stage from a JSON config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out-dir")
    sp.add_argument("--budget", type=float)
    sp.add_argument("--max-candidates", type=int)
    sp.set_defaults(func=cmd_pipeline)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return 0 if not exc.code else 1
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"error [config]: {exc}", file=sys.stderr)
        return 1
    except LogSentinelError as exc:
        print(f"error [{exc.stage}]: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error [{args.command}]: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
