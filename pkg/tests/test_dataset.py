import json

import pytest
from hypothesis import given
from hypothesis import strategies as st

from logsentinel import dataset as D
from logsentinel.dataset import Column, Dataset, LabeledQuery
from logsentinel.errors import EmptyJoin, IoFailure, SchemaMismatch
from logsentinel.log_ingest import FlatRecord, ingest_lines
from logsentinel.stats import mann_whitney_u


def rec(filter_text, **extra):
    values = {"t": "2024-05-01T12:00:00.000+00:00", "attr.planningTimeMicros": 100}
    values.update(extra)
    values["filter"] = filter_text
    return FlatRecord(values)


def test_exact_join():
    ds, report = D.join_labels([rec('{"a":{"$ne":null}}')], [LabeledQuery('{"a":{"$ne":null}}', True)])
    assert len(ds) == 1 and ds.label_values() == [1]
    assert "planningTimeMicros" in ds.names and "$ne" in ds.names
    assert ds.column("$ne") == [1]
    assert report.matched == 1 and report.unmatched_records == 0


def test_whitespace_and_quote_insensitive_join():
    queries = [LabeledQuery('{ "a" : { "$ne" : null } }', True), LabeledQuery("{'b': 'x y'}", False)]
    records = [rec('{"a":{"$ne":null}}'), rec('{"b":"x y"}')]
    ds, report = D.join_labels(records, queries)
    assert ds.label_values() == [1, 0]
    assert report.unmatched_queries == 0


def test_non_json_query_joins_through_where_wrapper():
    payload = "'; return true; var x='"
    lines = D.synth_logs([LabeledQuery(payload, True)], 3)
    records, _ = ingest_lines(lines)
    assert json.loads(records[0]["filter"]) == {"$where": payload}
    ds, _ = D.join_labels(records, [LabeledQuery(payload, True)])
    assert len(ds) == 1


def test_empty_join():
    with pytest.raises(EmptyJoin):
        D.join_labels([rec('{"a":1}')], [LabeledQuery('{"b":1}', True)])


def test_join_counts_and_labels():
    queries = [LabeledQuery('{"a":1}', True), LabeledQuery('{"b":2}', False), LabeledQuery('{"c":3}', True)]
    records = [rec('{"a":1}'), rec('{"b":2}'), rec('{"zzz":0}'), rec('{"a":1}')]
    ds, report = D.join_labels(records, queries)
    assert report.matched + report.unmatched_records == report.records == 4
    assert report.unmatched_queries == 1
    assert sorted(ds.label_values()) == [0, 1, 1]


def test_join_keeps_only_common_keys():
    records = [rec('{"a":1}', **{"attr.extra": 5}), rec('{"b":2}')]
    ds, _ = D.join_labels(records, [LabeledQuery('{"a":1}', True), LabeledQuery('{"b":2}', False)])
    assert "extra" not in ds.names


def test_full_synthetic_join():
    queries = D.bundled_queries()
    assert len(queries) == 400 and sum(q.label for q in queries) == 221
    records, _ = ingest_lines(D.synth_logs(queries, 11))
    ds, report = D.join_labels(records, queries)
    assert len(ds) == 400 and sum(ds.label_values()) == 221
    assert report.unmatched_queries == 0 and report.conflicting_queries == 0


def test_drop_constant_columns():
    ds = Dataset([Column("z", "boolean"), Column("v", "boolean"), Column("label", "label")],
                 [(0, 0, 1), (0, 1, 0), (0, 1, 1)])
    out, dropped = D.drop_constant_columns(ds)
    assert dropped == ["z"] and out.names == ["v", "label"]
    again, dropped2 = D.drop_constant_columns(out)
    assert again == out and dropped2 == []
    single = Dataset([Column("label", "label")], [(1,), (1,)])
    assert D.drop_constant_columns(single)[0].names == ["label"]


def test_build_drops_paper_constants():
    queries = D.bundled_queries()
    records, _ = ingest_lines(D.synth_logs(queries, 2))
    ds, report = D.build_dataset(records, queries)
    for name in ("reslen", "cursorExhausted", "queryFramework", "planSummary"):
        assert name in report.dropped_columns
        assert name not in ds.names
    assert "planningTimeMicros" in ds.names and "cpuNanos" in ds.names


def mixed():
    cols = [Column("text", "text"), Column("x", "numeric"), Column("flag", "boolean"),
            Column("label", "label")]
    rows = [('{"a":"b,c"}', 0.006628, 1, 1), ('say "hi"\nthere', 3, 0, 0), ("$ne", -1e-300, 1, 0)]
    return Dataset(cols, rows)


def test_csv_round_trip(tmp_path):
    for ds in (mixed(), Dataset(mixed().columns, ())):
        path = tmp_path / "d.csv"
        D.write_csv(ds, path)
        assert D.read_csv(path) == ds
    text = (tmp_path / "d.csv").read_text()
    assert text == "text,x,flag,label\n"


def test_csv_float_literal(tmp_path):
    path = tmp_path / "d.csv"
    D.write_csv(mixed(), path)
    assert "0.006628" in path.read_text()
    assert D.read_csv(path).column("x")[0] == 0.006628


def test_csv_errors(tmp_path):
    with pytest.raises(IoFailure):
        D.read_csv(tmp_path / "missing.csv")
    path = tmp_path / "d.csv"
    D.write_csv(mixed(), path)
    path.write_text(path.read_text().replace("text,x", "txt,x"))
    with pytest.raises(SchemaMismatch):
        D.read_csv(path)


def test_csv_rejects_nul(tmp_path):
    ds = Dataset(mixed().columns, [("a\x00b", 1, 1, 1)])
    with pytest.raises(SchemaMismatch):
        D.write_csv(ds, tmp_path / "d.csv")


def test_dataset_validation():
    with pytest.raises(SchemaMismatch):
        Dataset([Column("x", "numeric")], [])
    with pytest.raises(SchemaMismatch):
        Dataset([Column("x", "numeric"), Column("label", "label")], [(float("nan"), 1)])
    with pytest.raises(SchemaMismatch):
        Dataset([Column("b", "boolean"), Column("label", "label")], [(2, 1)])
    with pytest.raises(SchemaMismatch):
        Dataset([Column("label", "label")], [(3,)])


cells = st.tuples(
    st.text(st.characters(blacklist_characters="\x00"), max_size=12),
    st.one_of(st.integers(-10**9, 10**9), st.floats(allow_nan=False, allow_infinity=False)),
    st.integers(0, 1),
    st.integers(0, 1),
)


@given(st.lists(cells, max_size=8))
def test_csv_round_trip_property(rows):
    ds = Dataset(mixed().columns, rows)
    import tempfile
    from pathlib import Path
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "d.csv"
        D.write_csv(ds, path)
        assert D.read_csv(path) == ds


def test_synth_deterministic():
    qs = D.bundled_queries()[:20]
    assert D.synth_logs(qs, 5) == D.synth_logs(qs, 5)
    assert D.synth_logs(qs, 5) != D.synth_logs(qs, 6)


def test_synth_timing_calibration():
    queries = D.bundled_queries()
    records, stats = ingest_lines(D.synth_logs(queries, 1))
    assert stats.query_lines == 400
    planning = [r["attr.planningTimeMicros"] for r in records]
    cpu = [r["attr.cpuNanos"] for r in records]
    labels = [int(q.label) for q in queries]
    pos = [v for v, y in zip(planning, labels) if y]
    neg = [v for v, y in zip(planning, labels) if not y]
    assert mann_whitney_u(pos, neg).p < 0.01
    assert all(r["attr.planSummary"] == "COLLSCAN" for r in records)
    cpu_pos = [v for v, y in zip(cpu, labels) if y]
    cpu_neg = [v for v, y in zip(cpu, labels) if not y]
    assert mann_whitney_u(cpu_pos, cpu_neg).p > 0.01


def test_replay_script(tmp_path):
    script = D.emit_replay_script([LabeledQuery('{"a":{"$ne":null}}', True)])
    lines = script.splitlines()
    prof = lines.index("db.setProfilingLevel(2);")
    assert lines[prof + 1] == 'db.getCollection("users").find({"a":{"$ne":null}}).toArray();'
    empty = D.emit_replay_script([])
    assert "find(" not in empty and "db.setProfilingLevel(2);" in empty
    bad = D.emit_replay_script([LabeledQuery("1; return true", True)], tmp_path / "r.js")
    assert "// skipped query 0: not a JSON filter document: 1; return true" in bad
    assert (tmp_path / "r.js").read_text() == bad
    with pytest.raises(IoFailure):
        D.emit_replay_script([], tmp_path / "no" / "r.js")


def test_load_queries(tmp_path):
    path = tmp_path / "q.json"
    path.write_text(json.dumps([{"text": "{}", "label": "malicious"}, {"text": "{}", "label": 0}]))
    qs = D.load_queries(path)
    assert [q.label for q in qs] == [True, False]
    with pytest.raises(ValueError):
        LabeledQuery("", True)
