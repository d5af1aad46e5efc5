"""Read mongod structured JSON logs and flatten query entries into records.

mongod (4.4+) writes one JSON document per line with the top-level keys
``t``, ``s``, ``c``, ``id``, ``ctx``, ``msg`` and ``attr``.  With the
profiling level at 2 every operation is logged under ``msg == "Slow query"``
and the find filter sits at ``attr.command.filter``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Iterable

from .errors import IoFailure, MalformedLine

logger = logging.getLogger(__name__)

QUERY_MESSAGE = "Slow query"
FILTER_PATH = ("command", "filter")
REQUIRED_KEYS = ("t", "s", "c", "id", "ctx", "msg")


@dataclass(frozen=True)
class LogEntry:
    timestamp: datetime
    severity: str
    component: str
    id: int
    context: str
    message: str
    attributes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class FlatRecord:
    values: dict

    def __getitem__(self, key):
        return self.values[key]

    def __contains__(self, key):
        return key in self.values

    def get(self, key, default=None):
        return self.values.get(key, default)


@dataclass
class IngestStats:
    total_lines: int = 0
    query_lines: int = 0
    malformed_lines: int = 0

    def as_tuple(self):
        return (self.total_lines, self.query_lines, self.malformed_lines)


def parse_timestamp(raw: str) -> datetime:
    text = raw.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    ts = datetime.fromisoformat(text)
    if ts.tzinfo is None:
        ts = ts.replace(tzinfo=timezone.utc)
    # mongod logs carry millisecond precision; anything finer is noise.
    return ts.replace(microsecond=(ts.microsecond // 1000) * 1000)


def format_timestamp(ts: datetime) -> str:
    return ts.isoformat(timespec="milliseconds")


def _check_tree(node: Any) -> None:
    if isinstance(node, dict):
        for value in node.values():
            _check_tree(value)
    elif isinstance(node, list):
        for value in node:
            _check_tree(value)
    elif node is not None and not isinstance(node, (str, int, float, bool)):
        raise MalformedLine(f"unsupported attribute value {node!r}")


def parse_line(line: str, line_number: int | None = None) -> LogEntry:
    """Parse one structured log line.

    Raises MalformedLine when the text is not a JSON object or lacks one of
    the top-level keys; the caller decides whether to skip or abort.
    """
    if not line or not line.strip():
        raise MalformedLine("empty line", line_number)
    try:
        doc = json.loads(line)
    except (json.JSONDecodeError, RecursionError) as exc:
        raise MalformedLine(f"invalid JSON: {exc}", line_number) from None
    if not isinstance(doc, dict):
        raise MalformedLine("log line is not a JSON object", line_number)
    missing = [key for key in REQUIRED_KEYS if key not in doc]
    if missing:
        raise MalformedLine(f"missing top-level keys {missing}", line_number)

    raw_t = doc["t"]
    if isinstance(raw_t, dict):
        raw_t = raw_t.get("$date")
    if not isinstance(raw_t, str):
        raise MalformedLine("timestamp is not an ISO-8601 string", line_number)
    try:
        timestamp = parse_timestamp(raw_t)
    except ValueError as exc:
        raise MalformedLine(f"bad timestamp: {exc}", line_number) from None

    entry_id = doc["id"]
    if isinstance(entry_id, bool) or not isinstance(entry_id, int) or entry_id < 0:
        raise MalformedLine("id must be a non-negative integer", line_number)

    attributes = doc.get("attr", {})
    if not isinstance(attributes, dict):
        raise MalformedLine("attr must be an object", line_number)
    _check_tree(attributes)

    return LogEntry(
        timestamp=timestamp,
        severity=str(doc["s"]),
        component=str(doc["c"]),
        id=entry_id,
        context=str(doc["ctx"]),
        message=str(doc["msg"]),
        attributes=attributes,
    )


def format_line(entry: LogEntry) -> str:
    """Serialize an entry back to mongod's one-line JSON layout."""
    doc = {
        "t": {"$date": format_timestamp(entry.timestamp)},
        "s": entry.severity,
        "c": entry.component,
        "id": entry.id,
        "ctx": entry.context,
        "msg": entry.message,
        "attr": entry.attributes,
    }
    return json.dumps(doc, separators=(",", ":"), ensure_ascii=False)


def _get_path(tree: dict, path: tuple) -> Any:
    node = tree
    for key in path:
        if not isinstance(node, dict) or key not in node:
            return None
        node = node[key]
    return node


def is_query_entry(entry: LogEntry, message: str = QUERY_MESSAGE) -> bool:
    return (
        entry.message == message
        and isinstance(_get_path(entry.attributes, FILTER_PATH), dict)
    )


def serialize_filter(tree: Any) -> str:
    """Compact canonical text: no whitespace, original key order."""
    return json.dumps(tree, separators=(",", ":"), ensure_ascii=False)


def flatten_tree(node: Any, prefix: str = "", out: dict | None = None,
                 textual: tuple = ()) -> dict:
    """Expand nested dicts/lists into dotted paths.

    Paths listed in ``textual`` are serialized instead of expanded, stored
    under the last path segment.  Empty containers contribute no keys.
    """
    if out is None:
        out = {}
    if isinstance(node, dict):
        items = node.items()
    elif isinstance(node, list):
        items = ((str(i), v) for i, v in enumerate(node))
    else:
        out[prefix] = node
        return out
    for key, value in items:
        path = f"{prefix}.{key}" if prefix else str(key)
        if path in textual:
            out[path.rsplit(".", 1)[-1]] = serialize_filter(value)
        elif isinstance(value, (dict, list)):
            flatten_tree(value, path, out, textual)
        else:
            if path in out:
                raise ValueError(f"duplicate flattened key {path!r}")
            out[path] = value
    return out


def flatten(entry: LogEntry) -> FlatRecord:
    values = {
        "t": format_timestamp(entry.timestamp),
        "s": entry.severity,
        "c": entry.component,
        "id": entry.id,
        "ctx": entry.context,
        "msg": entry.message,
    }
    textual = ("attr." + ".".join(FILTER_PATH),)
    flatten_tree(entry.attributes, "attr", values, textual)
    return FlatRecord(values)


def iter_lines(lines: Iterable[str], strict: bool = False,
               message: str = QUERY_MESSAGE, stats: IngestStats | None = None):
    stats = stats if stats is not None else IngestStats()
    for number, line in enumerate(lines, start=1):
        line = line.rstrip("\r\n")
        if not line.strip():
            continue
        stats.total_lines += 1
        try:
            entry = parse_line(line, number)
        except MalformedLine as exc:
            if strict:
                raise
            stats.malformed_lines += 1
            logger.debug("skipping line %d: %s", number, exc)
            continue
        if is_query_entry(entry, message):
            stats.query_lines += 1
            yield flatten(entry)


def ingest_lines(lines: Iterable[str], strict: bool = False,
                 message: str = QUERY_MESSAGE):
    stats = IngestStats()
    records = list(iter_lines(lines, strict, message, stats))
    return records, stats


def ingest_file(path, strict: bool = False, message: str = QUERY_MESSAGE):
    """Return ``(records, stats)`` for every query entry in a log file."""
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as fh:
            return ingest_lines(fh, strict, message)
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc


def dump_jsonl(records, fh) -> None:
    for rec in records:
        fh.write(json.dumps(rec.values, ensure_ascii=False))
        fh.write("\n")
