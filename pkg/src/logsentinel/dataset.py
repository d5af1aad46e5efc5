"""Tabular dataset: label join, constant pruning, CSV persistence, synthesis.

A Dataset is an ordered list of typed columns plus row tuples.  Column
kinds are ``boolean`` (0/1), ``numeric`` (finite int/float), ``text`` and
exactly one ``label`` column (1 = injection).
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from datetime import datetime, timedelta, timezone
from pathlib import Path

import numpy as np

from . import filter_features
from .errors import EmptyJoin, IoFailure, SchemaMismatch
from .log_ingest import FlatRecord, serialize_filter

KINDS = ("boolean", "numeric", "text", "label")
LABEL = "label"


@dataclass(frozen=True)
class Column:
    name: str
    kind: str


@dataclass(frozen=True)
class Dataset:
    columns: tuple
    rows: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "columns", tuple(self.columns))
        object.__setattr__(self, "rows", tuple(tuple(r) for r in self.rows))
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise SchemaMismatch("duplicate column names")
        for col in self.columns:
            if col.kind not in KINDS:
                raise SchemaMismatch(f"unknown column kind {col.kind!r}")
        if sum(c.kind == "label" for c in self.columns) != 1:
            raise SchemaMismatch("exactly one label column required")
        width = len(self.columns)
        for row in self.rows:
            if len(row) != width:
                raise SchemaMismatch("row width does not match columns")
            for col, value in zip(self.columns, row):
                _check_cell(col, value)

    @property
    def names(self):
        return [c.name for c in self.columns]

    @property
    def label_name(self):
        return next(c.name for c in self.columns if c.kind == "label")

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(name) from None

    def kind(self, name):
        return self.columns[self.index(name)].kind

    def column(self, name):
        i = self.index(name)
        return [row[i] for row in self.rows]

    def label_values(self):
        return self.column(self.label_name)

    def __len__(self):
        return len(self.rows)

    def select(self, names):
        idx = [self.index(n) for n in names]
        return Dataset(
            tuple(self.columns[i] for i in idx),
            tuple(tuple(row[i] for i in idx) for row in self.rows),
        )

    def take(self, indices):
        return Dataset(self.columns, tuple(self.rows[i] for i in indices))

    def feature_names(self):
        return [c.name for c in self.columns if c.kind in ("boolean", "numeric")]

    def to_xy(self, features=None):
        """Feature matrix (float64) and label vector (int)."""
        features = self.feature_names() if features is None else list(features)
        idx = [self.index(n) for n in features]
        X = np.array([[row[i] for i in idx] for row in self.rows], dtype=float).reshape(len(self.rows), len(idx))
        y = np.array(self.label_values(), dtype=int)
        return X, y

    def unique_rows(self):
        seen = set()
        keep = []
        for i, row in enumerate(self.rows):
            if row not in seen:
                seen.add(row)
                keep.append(i)
        return self.take(keep)


def _check_cell(col, value):
    if col.kind in ("boolean", "label"):
        if value not in (0, 1) or isinstance(value, float) and not value.is_integer():
            raise SchemaMismatch(f"{col.name}: {col.kind} cell must be 0/1, got {value!r}")
    elif col.kind == "numeric":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise SchemaMismatch(f"{col.name}: numeric cell must be finite, got {value!r}")
    elif not isinstance(value, str):
        raise SchemaMismatch(f"{col.name}: text cell must be a string, got {value!r}")


@dataclass(frozen=True)
class LabeledQuery:
    text: str
    label: bool

    def __post_init__(self):
        if not self.text:
            raise ValueError("query text must be non-empty")


def load_queries(path) -> list[LabeledQuery]:
    """Read a JSON array of ``{"text": ..., "label": ...}`` objects."""
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    return [LabeledQuery(item["text"], _as_label(item["label"])) for item in raw]


def _as_label(value) -> bool:
    if isinstance(value, str):
        return value.strip().lower() in ("1", "true", "malicious", "injection")
    return bool(value)


def bundled_queries() -> list[LabeledQuery]:
    """The packaged 400-query corpus (221 injection, 179 benign)."""
    return load_queries(Path(__file__).parent / "data" / "queries.json")


# -- join -----------------------------------------------------------------

def normalize_filter_text(text: str) -> str:
    """Whitespace outside string literals removed; quotes unified to '"'."""
    out = []
    for tok in filter_features.tokenize_filter(text):
        if tok.text[:1] == "'":
            out.append(json.dumps(tok.value.replace("\\'", "'"), ensure_ascii=False))
        else:
            out.append(tok.text)
    return "".join(out)


def canonical_filter(text: str):
    """The filter document mongod would log for a query text.

    Valid JSON objects are re-serialized compactly; anything else is wrapped
    as ``{"$where": text}``.
    """
    try:
        doc = json.loads(text)
    except (json.JSONDecodeError, RecursionError):
        doc = None
    if not isinstance(doc, dict):
        doc = {"$where": text}
    return doc


@dataclass
class JoinReport:
    records: int = 0
    matched: int = 0
    unmatched_records: int = 0
    queries: int = 0
    unmatched_queries: int = 0
    conflicting_queries: int = 0
    dropped_columns: list = field(default_factory=list)

    def as_dict(self):
        return dict(self.__dict__)


def _record_kind(values):
    if all(isinstance(v, bool) for v in values):
        return "boolean"
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) and math.isfinite(v) for v in values):
        return "numeric"
    if all(isinstance(v, str) for v in values):
        return "text"
    return None


def _column_name(key: str) -> str:
    return key[5:] if key.startswith("attr.") else key


def join_labels(records, queries, features: bool = True):
    """Attach query labels to log records by normalized filter text.

    Returns ``(dataset, report)``.  Record keys missing from any matched
    record, or with mixed value types, are left out of the dataset.
    """
    lookup = {}
    report = JoinReport(records=len(records), queries=len(queries))
    for q in queries:
        for key in (normalize_filter_text(q.text),
                    normalize_filter_text(serialize_filter(canonical_filter(q.text)))):
            prev = lookup.get(key)
            if prev is None:
                lookup[key] = q
            elif prev.label != q.label and prev is not q:
                report.conflicting_queries += 1

    matched = []
    used = set()
    for rec in records:
        if "filter" not in rec:
            raise SchemaMismatch("record has no 'filter' key")
        q = lookup.get(normalize_filter_text(rec["filter"]))
        if q is None:
            report.unmatched_records += 1
            continue
        matched.append((rec, q))
        used.add(id(q))
    report.matched = len(matched)
    report.unmatched_queries = sum(1 for q in queries if id(q) not in used)
    if not matched:
        raise EmptyJoin(
            f"no log record matched any of {len(queries)} queries; "
            "check filter serialization"
        )

    keys = [k for k in matched[0][0].values if all(k in rec for rec, _ in matched)]
    columns = []
    record_keys = []
    for key in keys:
        kind = _record_kind([rec[key] for rec, _ in matched])
        if kind is None:
            report.dropped_columns.append(_column_name(key))
            continue
        columns.append(Column(_column_name(key), kind))
        record_keys.append(key)
    if features:
        for name in filter_features.FEATURE_COLUMNS:
            if name in filter_features.TEXT_COLUMNS:
                kind = "text"
            elif name in filter_features.NUMERIC_COLUMNS:
                kind = "numeric"
            else:
                kind = "boolean"
            columns.append(Column(name, kind))
    columns.append(Column(LABEL, "label"))

    rows = []
    for rec, q in matched:
        row = []
        for key, col in zip(record_keys, columns):
            value = rec[key]
            row.append(int(value) if col.kind == "boolean" else value)
        if features:
            feats = filter_features.extract(rec["filter"]).columns()
            for name in filter_features.FEATURE_COLUMNS:
                value = feats[name]
                row.append(int(value) if isinstance(value, bool) else value)
        row.append(int(q.label))
        rows.append(tuple(row))
    return Dataset(tuple(columns), tuple(rows)), report


def drop_constant_columns(ds: Dataset):
    """Remove every non-label column whose value never varies."""
    if not ds.rows:
        raise ValueError("dataset has no rows")
    keep, dropped = [], []
    for i, col in enumerate(ds.columns):
        first = ds.rows[0][i]
        if col.kind != "label" and all(row[i] == first for row in ds.rows):
            dropped.append(col.name)
        else:
            keep.append(col.name)
    return ds.select(keep), dropped


# -- CSV ------------------------------------------------------------------

def _format_cell(kind, value):
    if kind == "text":
        return value
    if isinstance(value, float):
        # repr gives the shortest string that round-trips
        return repr(value)
    return str(int(value))


def _parse_cell(kind, text):
    if kind == "text":
        return text
    if kind in ("boolean", "label"):
        return int(text)
    try:
        return int(text)
    except ValueError:
        return float(text)


def schema_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".schema.json")


def _quote(cell: str) -> str:
    # csv.writer leaves a lone "\r" unquoted, which the reader then splits on
    if "\x00" in cell:
        raise SchemaMismatch("text cells cannot contain NUL characters")
    if any(ch in cell for ch in ',"\r\n'):
        return '"' + cell.replace('"', '""') + '"'
    return cell


def dataset_to_csv_text(ds: Dataset) -> str:
    """RFC-4180 text with "\n" line endings and minimal quoting."""
    lines = [",".join(_quote(n) for n in ds.names)]
    for row in ds.rows:
        lines.append(",".join(_quote(_format_cell(c.kind, v)) for c, v in zip(ds.columns, row)))
    return "\n".join(lines) + "\n"


def schema_text(ds: Dataset) -> str:
    doc = {"columns": [{"name": c.name, "kind": c.kind} for c in ds.columns]}
    return json.dumps(doc, indent=2, ensure_ascii=False) + "\n"


def write_csv(ds: Dataset, path) -> None:
    """Write the CSV plus a ``<path>.schema.json`` sidecar with column kinds."""
    path = Path(path)
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(dataset_to_csv_text(ds))
        with open(schema_path(path), "w", encoding="utf-8", newline="") as fh:
            fh.write(schema_text(ds))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_csv(path) -> Dataset:
    path = Path(path)
    try:
        with open(schema_path(path), encoding="utf-8") as fh:
            schema = json.load(fh)
        with open(path, encoding="utf-8", newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            body = list(reader)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    columns = tuple(Column(c["name"], c["kind"]) for c in schema["columns"])
    if header is None or header != [c.name for c in columns]:
        raise SchemaMismatch(f"{path}: header does not match schema sidecar")
    rows = []
    for lineno, cells in enumerate(body, start=2):
        if len(cells) != len(columns):
            raise SchemaMismatch(f"{path}:{lineno}: expected {len(columns)} cells")
        try:
            rows.append(tuple(_parse_cell(c.kind, v) for c, v in zip(columns, cells)))
        except ValueError as exc:
            raise SchemaMismatch(f"{path}:{lineno}: {exc}") from None
    return Dataset(columns, tuple(rows))


# -- synthetic logs -------------------------------------------------------

# Class-conditional log-normal medians for planning time (microseconds);
# CPU time is drawn independently of the class.
PLANNING_MEDIAN = {0: 150.0, 1: 210.0}
PLANNING_SIGMA = 0.6
CPU_MEDIAN = 40000.0
CPU_SIGMA = 0.5
SYNTH_START = datetime(2024, 5, 1, 12, 0, 0, tzinfo=timezone.utc)


def synth_logs(queries, seed: int, collection: str = "users", database: str = "test") -> list[str]:
    """One mongod "Slow query" line per query, deterministic given ``seed``."""
    rng = np.random.default_rng(seed)
    lines = []
    for i, q in enumerate(queries):
        label = int(bool(q.label))
        planning = int(round(rng.lognormal(math.log(PLANNING_MEDIAN[label]), PLANNING_SIGMA)))
        cpu = int(round(rng.lognormal(math.log(CPU_MEDIAN), CPU_SIGMA)))
        ts = SYNTH_START + timedelta(milliseconds=137 * i)
        doc = {
            "t": {"$date": ts.isoformat(timespec="milliseconds")},
            "s": "I",
            "c": "COMMAND",
            "id": 51803,
            "ctx": "conn7",
            "msg": "Slow query",
            "attr": {
                "type": "command",
                "ns": f"{database}.{collection}",
                "appName": "mongosh 2.2.5",
                "command": {
                    "find": collection,
                    "filter": canonical_filter(q.text),
                    "lsid": {"id": {"$uuid": "6f1c2d1e-3b8a-4c55-9a57-2d0f8f0b9c11"}},
                    "$db": database,
                },
                "planSummary": "COLLSCAN",
                "planningTimeMicros": planning,
                "keysExamined": 0,
                "docsExamined": 0,
                "cursorExhausted": True,
                "numYields": 0,
                "nreturned": 0,
                "queryFramework": "classic",
                "reslen": 104,
                "locks": {
                    "FeatureCompatibilityVersion": {"acquireCount": {"r": 1}},
                    "Global": {"acquireCount": {"r": 1}},
                },
                "storage": {},
                "cpuNanos": cpu,
                "remote": "127.0.0.1:41432",
                "protocol": "op_msg",
                "durationMillis": 0,
            },
        }
        lines.append(json.dumps(doc, separators=(",", ":"), ensure_ascii=False))
    return lines


def write_lines(lines, path) -> None:
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


# -- replay script --------------------------------------------------------

def emit_replay_script(queries, path=None, collection: str = "users",
                       database: str = "test") -> str:
    """A mongosh script that enables full profiling and replays every query."""
    lines = [
        "// Replay labeled queries against an empty server.",
        "// Usage: mongosh --quiet replay.js",
        f"db = db.getSiblingDB({json.dumps(database)});",
        "db.setProfilingLevel(2);",
    ]
    for i, q in enumerate(queries):
        try:
            doc = json.loads(q.text)
        except (json.JSONDecodeError, RecursionError):
            doc = None
        if isinstance(doc, dict):
            lines.append(f"db.getCollection({json.dumps(collection)}).find({q.text}).toArray();")
        else:
            reason = "not a JSON filter document"
            text = q.text.replace("\n", "\\n")
            lines.append(f"// skipped query {i}: {reason}: {text}")
    script = "\n".join(lines) + "\n"
    if path is not None:
        try:
            with open(path, "w", encoding="utf-8", newline="") as fh:
                fh.write(script)
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
    return script


def build_dataset(records, queries):
    """Join, then prune constant columns; returns ``(dataset, report)``."""
    ds, report = join_labels(records, queries)
    ds, dropped = drop_constant_columns(ds)
    report.dropped_columns.extend(dropped)
    return ds, report
