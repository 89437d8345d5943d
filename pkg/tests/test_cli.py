import json

import pytest

from emaclust.cli import main


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli")
    code = main(["generate", "--groups", "2", "--per-group", "4", "--vars", "2", "--length-min", "40",
                 "--length-max", "50", "--seed", "7", "--out", str(out)])
    assert code == 0
    return out


def parse_report(text):
    return dict(line.split(": ", 1) for line in text.strip().splitlines())


def test_generate_writes_files(workdir):
    assert (workdir / "panel.csv").read_text().startswith("individual_id,time_index,v0,v1")
    assert (workdir / "ground_truth.csv").read_text().splitlines()[0] == "individual_id,group"
    meta = json.loads((workdir / "generate_meta.json").read_text())
    assert meta["seed"] == 7


@pytest.mark.parametrize("approach", ["poc", "pdc", "random", "one", "n"])
def test_cluster_each_approach(workdir, tmp_path, approach, capsys):
    args = ["cluster", "--data", str(workdir / "panel.csv"), "--approach", approach, "--out", str(tmp_path)]
    if approach in ("poc", "pdc", "random"):
        args += ["--k", "2"]
    assert main(args) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["k_effective"] >= 1
    assert (tmp_path / "labels.csv").exists()
    meta = json.loads((tmp_path / "cluster_meta.json").read_text())
    assert meta["approach"] == approach
    assert (tmp_path / "poc_trace.json").exists() == (approach == "poc")


def test_cluster_then_evaluate_recovers_truth(workdir, tmp_path, capsys):
    assert main(["cluster", "--data", str(workdir / "panel.csv"), "--approach", "poc", "--k", "2",
                 "--out", str(tmp_path)]) == 0
    capsys.readouterr()
    assert main(["evaluate", "--data", str(workdir / "panel.csv"), "--labels", str(tmp_path / "labels.csv"),
                 "--against", str(workdir / "ground_truth.csv")]) == 0
    report = parse_report(capsys.readouterr().out)
    assert float(report["ami"]) == 1.0
    assert float(report["ari"]) == 1.0
    assert {"silhouette_params", "silhouette_dtw", "total_loss"} <= set(report)


def test_usage_errors_exit_2(workdir, tmp_path, capsys):
    data = str(workdir / "panel.csv")
    assert main(["cluster", "--data", data, "--approach", "poc", "--k", "1"]) == 2
    assert main(["cluster", "--data", data, "--approach", "poc", "--k", "99", "--out", str(tmp_path)]) == 2
    assert main(["cluster", "--data", str(tmp_path / "missing.csv"), "--approach", "one"]) == 2
    assert main(["cluster", "--model", "lstm"]) == 2
    assert main(["report", "--results", str(tmp_path / "none.jsonl")]) == 2
    err = capsys.readouterr().err.strip().splitlines()
    assert json.loads(err[-1])["error"] == "UsageError"


def test_computation_error_exits_1(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("individual_id,time_index,a\nx,0,oops\n")
    assert main(["cluster", "--data", str(bad), "--approach", "one"]) == 1
    assert json.loads(capsys.readouterr().err.strip())["error"] == "ParseError"


def test_experiment_and_report(workdir, tmp_path, capsys):
    cfg = tmp_path / "grid.ini"
    cfg.write_text(
        "[experiment]\napproaches = pdc, poc\nmodels = var\nk_values = 2, 3\niterations = 2\n"
        f"data = {workdir / 'panel.csv'}\nout = {tmp_path / 'results.jsonl'}\n"
        "[rf]\nn_trees = 5\n"
    )
    assert main(["experiment", "--config", str(cfg)]) == 0
    lines = (tmp_path / "results.jsonl").read_text().splitlines()
    assert len(lines) == 2 * 2 * 2
    assert main(["experiment", "--config", str(cfg), "--k", "2", "--approach", "poc"]) == 0
    assert len((tmp_path / "results.jsonl").read_text().splitlines()) == 8
    assert main(["report", "--results", str(tmp_path / "results.jsonl"), "--out", str(tmp_path / "rep")]) == 0
    for name in ("table1", "table2", "silhouette", "stability"):
        assert (tmp_path / "rep" / f"{name}.csv").exists()


def test_experiment_config_errors(tmp_path):
    cfg = tmp_path / "bad.ini"
    cfg.write_text("[experiment]\nwhatever = 1\n")
    assert main(["experiment", "--config", str(cfg)]) == 2
    cfg.write_text("[experiment]\niterations = 1\n")
    assert main(["experiment", "--config", str(cfg)]) == 2
    assert main(["experiment", "--config", str(cfg), "--k", "two"]) == 2
