import json

import pytest

from vsm_probe.cli import main


@pytest.fixture
def two_sets(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["run", "--model", "alpha", "--scripted", "uniform:1", "--seeds", "2", "--out", str(a)]) == 0
    assert main(["run", "--model", "beta", "--lang", "zh", "--response-lang", "en", "--shuffle",
                 "--scripted", "uniform:2", "--seed-list", "3,5", "--out", str(b)]) == 0
    return a, b


def test_run_writes_set(two_sets):
    a, b = two_sets
    manifest = json.loads((b / "manifest.json").read_text())
    assert manifest["status"] == "complete"
    assert manifest["record_count"] == 2 * 24 * 54
    assert manifest["config"]["seeds"] == [3, 5]
    assert manifest["config"]["response_language"] == "en"
    assert (a / "cache").is_dir()


def test_score_stdout(two_sets, capsys):
    capsys.readouterr()
    assert main(["score", "--set", str(two_sets[0])]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "nation,PDI,IDV,MAS,UAI,LTO,IVR" and len(out) == 10


def test_compare_stdout(two_sets, capsys):
    capsys.readouterr()
    assert main(["compare", "--sets", *map(str, two_sets), "--metric", "pearson"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "pearson_rho,alpha:en,beta:zh>en+shuffle"
    assert lines[1].startswith("alpha:en,1.000,")


def test_report_directory(two_sets, tmp_path):
    mmlu = tmp_path / "mmlu.csv"
    mmlu.write_text("model,score\nalpha,68.9\nbeta,70.6\n")
    out = tmp_path / "report"
    assert main(["report", "--sets", *map(str, two_sets), "--mmlu", str(mmlu), "--out", str(out)]) == 0
    names = {p.name for p in out.iterdir()}
    for stem in ("dbi", "ss", "ss_h", "pearson_rho", "pearson_p", "mmlu_delta"):
        assert f"matrix_{stem}.csv" in names and f"matrix_{stem}.json" in names
    assert {"set00_report.json", "set01_nationals.csv", "set00_identity_scores.csv", "disparity.csv"} <= names
    delta = json.loads((out / "matrix_mmlu_delta.json").read_text())
    assert delta["values"][0][1] == pytest.approx(1.7)
    assert len((out / "set00_identity_scores.csv").read_text().splitlines()) == 55


def test_replay_only_rerun(two_sets, tmp_path):
    a = two_sets[0]
    again = tmp_path / "again"
    assert main(["run", "--model", "alpha", "--replay-only", "--cache", str(a / "cache"),
                 "--seeds", "2", "--out", str(again)]) == 0
    assert (again / "records.jsonl").read_bytes() == (a / "records.jsonl").read_bytes()
    assert (again / "vectors.csv").read_bytes() == (a / "vectors.csv").read_bytes()


def test_replay_miss_exit_code(tmp_path, capsys):
    code = main(["run", "--model", "alpha", "--replay-only", "--seeds", "1", "--out", str(tmp_path / "x")])
    assert code == 2
    assert "CacheMiss" in capsys.readouterr().err


def test_run_needs_endpoint(tmp_path):
    with pytest.raises(SystemExit):
        main(["run", "--model", "m", "--out", str(tmp_path)])
