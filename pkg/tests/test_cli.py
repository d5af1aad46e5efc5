import json

import pytest

from logsentinel import dataset as D
from logsentinel.cli import RunConfig, main, parse_params, parse_seeds
from logsentinel.errors import ConfigError

from conftest import GOLDEN


@pytest.fixture(scope="module")
def built(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cli")
    log = tmp / "mongod.log"
    assert main(["synth", "--seed", "1", "--out", str(log)]) == 0
    assert main(["build", "--log", str(log), "--out", str(tmp / "d.csv")]) == 0
    assert main(["select", "--dataset", str(tmp / "d.csv"), "--report", str(tmp / "sel.md"),
                 "--out", str(tmp / "r.csv")]) == 0
    return tmp


def test_parse_seeds():
    assert parse_seeds("1:50") == list(range(1, 51))
    assert parse_seeds("3,5,9") == [3, 5, 9]
    for bad in ("5:1", "a:b", ""):
        with pytest.raises(ConfigError):
            parse_seeds(bad)


def test_parse_params():
    assert parse_params(["k=3", "max_features=sqrt", "max_depth=null"]) == {
        "k": 3, "max_features": "sqrt", "max_depth": None}
    with pytest.raises(ConfigError):
        parse_params(["k"])


def test_usage_errors(capsys):
    assert main(["select", "--bogus"]) == 1
    assert main([]) == 1
    assert main(["nope"]) == 1
    assert "usage" in capsys.readouterr().err


def test_help_exits_zero(capsys):
    assert main(["--help"]) == 0


def test_data_errors(tmp_path, capsys):
    assert main(["ingest", "--log", str(tmp_path / "missing.log")]) == 2
    assert "error [io]" in capsys.readouterr().err
    log = tmp_path / "other.log"
    log.write_text('{"t":{"$date":"2024-05-01T12:00:00.000Z"},"s":"I","c":"C","id":1,"ctx":"x",'
                   '"msg":"Slow query","attr":{"command":{"filter":{"nomatch":1}}}}\n')
    assert main(["build", "--log", str(log), "--out", str(tmp_path / "d.csv")]) == 2
    assert "error [build]" in capsys.readouterr().err


def test_select_stdout(built, capsys):
    assert main(["select", "--dataset", str(built / "d.csv"), "--alpha", "0.01"]) == 0
    out = capsys.readouterr().out
    assert out.startswith("| Variable |")
    assert set(D.read_csv(built / "r.csv").names) == {"$ne", "$", "planningTimeMicros",
                                                      "query_length_keywords_only", "label"}


def test_ingest_and_build_from_records(built, tmp_path, capsys):
    recs = tmp_path / "recs.jsonl"
    assert main(["ingest", "--log", str(built / "mongod.log"), "--out", str(recs)]) == 0
    assert "total=400 query=400 malformed=0" in capsys.readouterr().err
    assert main(["build", "--records", str(recs), "--out", str(tmp_path / "d.csv")]) == 0
    assert (tmp_path / "d.csv").read_bytes() == (built / "d.csv").read_bytes()


def test_extract(capsys):
    assert main(["extract", "--filter", '{"username":{"$ne":null}}']) == 0
    row = json.loads(capsys.readouterr().out)
    assert row["$ne"] is True and row["query_length_keywords_only"] == 13


def test_project(built, tmp_path):
    for method in ("lda", "pca"):
        out = tmp_path / f"{method}.csv"
        assert main(["project", "--dataset", str(built / "r.csv"), "--method", method,
                     "--out", str(out), "--svg", str(tmp_path / f"{method}.svg")]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "x,y,label" and len(lines) == 401
        assert (tmp_path / f"{method}.svg").read_text().count("<circle") == 400


def test_train_and_evaluate(built, tmp_path):
    model = tmp_path / "m.json"
    assert main(["train", "--dataset", str(built / "r.csv"), "--family", "knn",
                 "--param", "k=3", "--out", str(model)]) == 0
    doc = json.loads(model.read_text())
    assert doc["spec"]["hyperparameters"] == {"k": 3}
    assert main(["train", "--dataset", str(built / "r.csv"), "--family", "knn",
                 "--param", "k=0", "--out", str(model)]) == 1
    rep = tmp_path / "rep.md"
    ev = tmp_path / "ev.json"
    args = ["evaluate", "--dataset", str(built / "r.csv"), "--seeds", "1:2", "--k", "5",
            "--families", "knn", "naive_bayes", "--json", str(ev), "--out", str(rep)]
    assert main(args) == 0
    first = rep.read_bytes()
    assert main(args) == 0
    assert rep.read_bytes() == first
    csv_out = tmp_path / "rep.csv"
    assert main(["report", "--input", str(ev), "--format", "csv", "--out", str(csv_out)]) == 0
    assert csv_out.read_text().splitlines()[1].startswith("K-Nearest Neighbors,")
    assert main(["report", "--input", str(ev), "--out", str(tmp_path / "again.md")]) == 0
    assert (tmp_path / "again.md").read_bytes() == first


def test_automl(built, capsys):
    assert main(["automl", "--dataset", str(built / "r.csv"), "--budget", "1e9",
                 "--max-candidates", "2"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["evaluated"] == 2 and doc["spec"]["family"] == "gbdt_limited_depth"


def test_replay_script(tmp_path):
    q = tmp_path / "q.json"
    q.write_text(json.dumps([{"text": '{"a":{"$ne":null}}', "label": 1}]))
    out = tmp_path / "replay.js"
    assert main(["replay-script", "--queries", str(q), "--out", str(out)]) == 0
    text = out.read_text()
    assert "db.setProfilingLevel(2);" in text and 'find({"a":{"$ne":null}})' in text


def test_input_files_untouched(built):
    before = (built / "d.csv").read_bytes()
    assert main(["select", "--dataset", str(built / "d.csv"), "--report", str(built / "s2.md")]) == 0
    assert (built / "d.csv").read_bytes() == before


def test_config_validation():
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"alpha": 2})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"colour": "red"})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"stratify": True})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"ratios": [0.5, 0.5, 0.5]})
    assert RunConfig.from_dict({}).seeds == "1:50"


def test_pipeline_bad_config(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text('{"k": 1}')
    assert main(["pipeline", "--config", str(cfg)]) == 1
    cfg.write_text("not json")
    assert main(["pipeline", "--config", str(cfg)]) == 1


def test_golden_files_present():
    for name in ("dataset.csv", "selection.md", "projection_lda.csv", "projection_pca.csv",
                 "projection_tsne.csv", "evaluation.md"):
        assert (GOLDEN / "pipeline" / name).is_file()
