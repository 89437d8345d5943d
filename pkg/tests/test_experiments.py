import csv
import json

import numpy as np
import pytest

from emaclust.errors import ConfigError, EmaclustError, InvalidKError
from emaclust.forecast import Hyperparameters
from emaclust.panel import SyntheticSpec, generate_synthetic
from emaclust.experiments import (
    ExperimentConfig,
    ExperimentResult,
    grid_cells,
    load_results,
    prepare,
    run_grid,
    run_n_clustering,
    run_one_clustering,
    run_pdc,
    run_poc,
    run_random_clustering,
    score_partition,
    summarize,
    write_report,
)

FAST = Hyperparameters(n_trees=5, n_cycles=10, min_samples_leaf=3)


@pytest.fixture(scope="module")
def small():
    spec = SyntheticSpec(n_groups=2, individuals_per_group=4, n_vars=2, length_range=(40, 50), missing_rate=0.05)
    ds, truth = generate_synthetic(spec, 2)
    return ds, truth


@pytest.fixture(scope="module")
def ctx(small):
    return prepare(small[0], ExperimentConfig(hyper=FAST))


def small_cfg(**kw):
    base = dict(approaches=("pdc", "poc", "random", "one", "n"), kinds=("var",), k_values=(2, 3),
                n_iterations=2, seed=5, hyper=FAST)
    base.update(kw)
    return ExperimentConfig(**base)


def test_config_validation():
    with pytest.raises(ConfigError):
        ExperimentConfig(approaches=("kmeans",))
    with pytest.raises(ConfigError):
        ExperimentConfig(n_iterations=0)
    with pytest.raises(ConfigError):
        ExperimentConfig(test_fraction=1.0)
    with pytest.raises(ConfigError):
        ExperimentConfig(holdout="train")
    with pytest.raises(ConfigError):
        ExperimentConfig(init="random")
    with pytest.raises(ValueError):
        ExperimentConfig(kinds=("lstm",))


def test_grid_cells_order_and_seeds():
    cells = grid_cells(small_cfg(), 8)
    assert cells[0] == ("pdc", "var", 2, 0, 5)
    assert cells[1] == ("pdc", "var", 2, 1, 6)
    assert ("one", "var", 1, 0, 5) in cells
    assert ("n", "var", 8, 1, 6) in cells
    assert len(cells) == 3 * 2 * 2 + 2 + 2
    with pytest.raises(ConfigError):
        grid_cells(small_cfg(k_values=(8,)), 8)


def test_baselines(ctx):
    one = run_one_clustering(ctx, "var", seed=1)
    n = run_n_clustering(ctx, "var", seed=1)
    assert one.labels == [0] * ctx.n and one.k_effective == 1
    assert n.labels == list(range(ctx.n)) and n.k_given == ctx.n
    assert one.valid and n.valid


def test_random_clustering_never_empty(ctx):
    for seed in range(10):
        res = run_random_clustering(ctx, 4, "var", seed=seed)
        assert res.k_effective == 4
        assert sorted(set(res.labels)) == [0, 1, 2, 3]
    with pytest.raises(InvalidKError):
        run_random_clustering(ctx, 0, "var")


def test_random_clustering_accepts_panel(small):
    res = run_random_clustering(small[0], 2, "var", seed=3)
    assert res.approach == "random" and res.k_effective == 2


def test_poc_result_is_rescorable(ctx):
    res, state = run_poc(ctx, "var", 2, seed=3, return_state=True)
    assert res.termination == state.termination
    inner = state.best_so_far.assignment.seed
    loss, _ = score_partition(ctx, "var", np.array(res.labels), inner)
    assert loss == res.total_loss


def test_pdc_result_fields(ctx):
    res = run_pdc(ctx, "var", 2, seed=0, silhouettes=True)
    assert res.approach == "pdc"
    assert -1 <= res.silhouette_params <= 1
    assert -1 <= res.silhouette_dtw <= 1
    assert res.total_loss > 0


def test_result_roundtrip_and_determinism_key():
    res = ExperimentResult("poc", "var", 2, 0, 7, k_effective=2, total_loss=1.5, labels=[0, 1], valid=True,
                           wall_time=0.3)
    back = ExperimentResult.from_dict(json.loads(json.dumps(res.to_dict())))
    assert back == res
    assert "wall_time" not in res.deterministic_dict()
    assert res.key == ("poc", "var", 2, 0, 7)


def test_run_grid_resumes(tmp_path, small):
    out = tmp_path / "results.jsonl"
    cfg = small_cfg(approaches=("poc", "one"), k_values=(2,))
    first = run_grid(cfg, small[0], out)
    lines = out.read_text().splitlines()
    assert len(lines) == len(first) == 4
    again = run_grid(cfg, small[0], out)
    assert len(out.read_text().splitlines()) == 4
    assert [r.deterministic_dict() for r in again] == [r.deterministic_dict() for r in first]
    meta = json.loads((tmp_path / "results.jsonl.meta.json").read_text())
    assert meta["n_individuals"] == len(small[0])
    assert "numpy" in meta["versions"]


def test_failed_cell_is_recorded(small):
    cfg = small_cfg(approaches=("pdc",), kinds=("rf",), k_values=(2,), n_iterations=1,
                    hyper=Hyperparameters(n_trees=2, min_samples_leaf=500), silhouettes=False)
    (res,) = run_grid(cfg, small[0])
    assert res.error and "InsufficientDataError" in res.error
    assert not res.valid


def test_grid_is_deterministic_across_jobs(small):
    cfg = small_cfg(kinds=("var", "rf"), k_values=(2,))
    a = run_grid(cfg, small[0], jobs=1)
    b = run_grid(cfg, small[0], jobs=2)
    assert [r.deterministic_dict() for r in a] == [r.deterministic_dict() for r in b]


def test_summary_and_report(tmp_path, small):
    results = run_grid(small_cfg(), small[0])
    tables = summarize(results)
    t1 = {(r["approach"], r["k_given"]): r for r in tables["table1"]}
    assert t1[("poc", 2)]["n_iterations"] == 2
    assert t1[("poc", 3)]["mean_k_effective"] <= 3
    scenarios = {r["scenario"] for r in tables["table2"]}
    assert {"1-Clustering", "N-Clustering", "Random-Clustering", "k-Clustering (POC)"} <= scenarios
    paths = write_report(results, tmp_path / "report")
    names = {p.name for p in paths}
    assert {"table1.csv", "table2.csv", "silhouette.csv", "stability.csv"} <= names
    with (tmp_path / "report" / "stability.csv").open() as fh:
        rows = list(csv.DictReader(fh))
    assert all(r["stability"] == "" or -1 <= float(r["stability"]) <= 1 for r in rows)
    with pytest.raises(EmaclustError):
        write_report([], tmp_path / "empty")


def test_load_results_missing_file(tmp_path):
    assert load_results(tmp_path / "nope.jsonl") == []


def test_validation_holdout_scores_on_test(small):
    cfg = ExperimentConfig(hyper=FAST, holdout="validation")
    c = prepare(small[0], cfg)
    fold = c.folds[0]
    assert fold.select is not fold.test
    assert fold.train.n_rows + fold.select.n_rows + fold.test.n_rows == small[0][0].n_rows
    res = run_poc(c, "var", 2, seed=0)
    assert res.total_loss > 0
