import json
import math

import pytest

from detmerge.errors import EmptyCorpus, MalformedInput
from detmerge.experiment import (REGIME_UNIONS, GridCell, evaluate_cell, load_grid, paper_default_grid,
                                 run_grid)
from detmerge.synthgen import GenConfig, generate_corpus, sample_scenes


@pytest.fixture(scope="module")
def corpus():
    cfg = GenConfig(seed=0, n_samples=10)
    return generate_corpus(sample_scenes("default", cfg, 8), cfg)


def test_default_grid_size():
    cells = paper_default_grid()
    assert len(cells) == 38
    assert len({c.label for c in cells}) == 38
    assert sum(c.method == "BSAS" for c in cells) == 12
    assert sum(c.method == "BSASExclusive" for c in cells) == 12
    assert sum(c.method == "Hungarian" for c in cells) == 9
    assert sum(c.method == "HDBSCAN" for c in cells) == 3


def test_single_cell_rows(corpus):
    result = evaluate_cell(GridCell("BSAS", "IoU+SL", 0.95), corpus.sample_sets, corpus.ground_truth,
                           kinds=("entropy",))
    assert [r["dataset_regimes"] for r in result.rows] == [name for name, _ in REGIME_UNIONS]
    closed = result.rows[0]
    assert closed["n_open_err"] == 0
    assert result.rows[-1]["n_correct"] == closed["n_correct"]


def test_standard_baseline_has_no_spatial(corpus):
    result = evaluate_cell(GridCell("Standard", "none"), corpus.sample_sets, corpus.ground_truth)
    spatial_rows = [r for r in result.rows if r["uncertainty_kind"] == "spatial"]
    assert all(math.isnan(r["ue_min"]) for r in spatial_rows)
    assert result.spatial == []


def test_empty_corpus():
    with pytest.raises(EmptyCorpus):
        run_grid([], [], paper_default_grid())


def test_failed_cell_isolated(corpus):
    cells = [GridCell("BSAS", "IoU", 0.9), GridCell("HDBSCAN", "Centroid", min_cluster_size=1)]
    results = run_grid(corpus.sample_sets, corpus.ground_truth, cells, ("entropy",))
    assert results[0].error is None and len(results[0].rows) == 4
    assert "MalformedInput" in results[1].error and results[1].rows == []


def test_jobs_do_not_change_results(corpus):
    cells = paper_default_grid()[:6]
    one = run_grid(corpus.sample_sets, corpus.ground_truth, cells, jobs=1)
    many = run_grid(corpus.sample_sets, corpus.ground_truth, cells, jobs=3)
    assert [json.dumps(r.rows, sort_keys=True) for r in one] == [json.dumps(r.rows, sort_keys=True) for r in many]


def test_grid_cell_validation():
    with pytest.raises(MalformedInput):
        GridCell("KMeans", "IoU")
    with pytest.raises(MalformedInput):
        GridCell("BSAS", "IoU+XX", 0.9)
    with pytest.raises(ValueError):
        GridCell("HDBSCAN", "Diagonal")
    assert GridCell("BSAS", "IoU", 0.95).label == "BSAS IoU 0.95"


def test_load_grid(tmp_path):
    path = tmp_path / "grid.json"
    path.write_text(json.dumps([{"method": "BSAS", "affinity": "IoU", "theta": 0.8},
                                {"method": "HDBSCAN", "affinity": "Corner", "min_cluster_size": 3}]))
    cells = load_grid(str(path))
    assert cells[1].hdbscan_config(20).min_cluster_size == 3
    assert load_grid("paper-default") == paper_default_grid()
    path.write_text("[]")
    with pytest.raises(MalformedInput):
        load_grid(str(path))
    path.write_text('[{"affinity": "IoU"}]')
    with pytest.raises(MalformedInput):
        load_grid(str(path))
