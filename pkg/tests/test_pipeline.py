import csv
import json
import math
import socket
import statistics
from pathlib import Path

import pytest
from sklearn.metrics import adjusted_rand_score

from mailtopics import pipeline
from mailtopics.cluster import ClusterParams
from mailtopics.errors import EmptyCorpus, NoTopics, PipelineError
from mailtopics.evaluation import EvalReport, aggregate
from mailtopics.ingest import IngestConfig
from mailtopics.pipeline import (
    GRID_COLUMNS,
    RAW_COLUMNS,
    PipelineConfig,
    derive_seed,
    read_grid_csv,
    run_grid,
    run_pipeline,
    splitmix64,
)
from mailtopics.report import REPORT_COLUMNS

ALGORITHMS = ["hdbscan_eom", "hdbscan_leaf", "optics_xi"]
SIZES = [50, 100, 150]


@pytest.fixture
def no_network(monkeypatch):
    def refuse(*args, **kwargs):
        raise AssertionError("network access attempted")

    monkeypatch.setattr(socket.socket, "connect", refuse)
    monkeypatch.setattr(socket, "create_connection", refuse)


@pytest.fixture(scope="module")
def first_run(tmp_path_factory, synthetic):
    tmp = tmp_path_factory.mktemp("run")
    paths = synthetic.write(tmp / "synthetic")
    cfg = PipelineConfig(corpus=str(paths["corpus"]), output_dir=str(tmp / "out"))
    cfg.provider.mode, cfg.provider.file_path = "file", str(paths["embeddings"])
    return cfg, run_pipeline(cfg)


def test_seed_derivation():
    assert splitmix64(0) == 0xE220A8397B1DCDAF
    assert derive_seed(0, "reduce") != derive_seed(0, "lda")
    assert derive_seed(7, "run", 1) == derive_seed(7, "run", 1) != derive_seed(7, "run", 2)
    with pytest.raises(KeyError):
        derive_seed(0, "nope")


def test_synthetic_run_recovers_templates(first_run, synthetic):
    cfg, report = first_run
    assert report.n_clusters >= 10
    truth = dict(zip((r["id"] for r in synthetic.records), synthetic.truth))
    labels = report.assignment.labels
    assert adjusted_rand_score([truth[i] for i in report.doc_ids], labels) >= 0.8
    # schema: exact column set, one row per cluster, outliers never a topic
    assert len(report.rows) == report.n_clusters
    assert all(list(row) == list(REPORT_COLUMNS) for row in report.rows)
    assert all(row["Name"] and len(row["Name"].split()) <= 4 for row in report.rows)
    assert report.eval.n_topics == report.n_clusters


def test_written_outputs(first_run):
    cfg, report = first_run
    out = Path(cfg.output_dir)
    names = {p.name for p in out.iterdir()}
    assert {"report.json", "report.csv", "assignments.csv", "ledger.json", "lexicon.json", "scatter.svg",
            "run_meta.json"} <= names
    data = json.loads((out / "report.json").read_text())
    assert data["columns"] == list(REPORT_COLUMNS)
    assert "output_dir" not in data["config"]
    with open(out / "report.csv", newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert rows == report.rows
    with open(out / "assignments.csv", newline="") as fh:
        assigned = list(csv.DictReader(fh))
    assert len(assigned) == len(report.doc_ids)
    assert (out / "scatter.svg").read_text().startswith("<svg")


def test_rerun_is_byte_identical(first_run, tmp_path):
    cfg, _ = first_run
    again = PipelineConfig.from_dict({**cfg.to_dict(), "output_dir": str(tmp_path / "again")})
    run_pipeline(again)
    first = (Path(cfg.output_dir) / "report.json").read_bytes()
    assert (tmp_path / "again" / "report.json").read_bytes() == first


def test_config_roundtrip(tmp_path):
    cfg = PipelineConfig(master_seed=11, cluster=ClusterParams("optics_xi", 75))
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    back = PipelineConfig.load(path)
    assert back == cfg and back.cluster.min_cluster_size == 75


def test_empty_corpus_names_ingest(stub_config):
    stub_config.ingest = IngestConfig(max_chars=5)
    with pytest.raises(PipelineError) as info:
        run_pipeline(stub_config)
    assert info.value.stage == "ingest"
    assert isinstance(info.value.__cause__, EmptyCorpus)
    assert not Path(stub_config.output_dir).exists()


def test_stub_labeler_needs_no_network(stub_config, no_network):
    assert stub_config.labeler.mode == "stub"
    report = run_pipeline(stub_config, write=False)
    assert report.n_clusters >= 10
    assert all(c["semantic_label"] for c in report.clusters)


def test_failure_leaves_no_partial_outputs(stub_config, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("plot failed")

    monkeypatch.setattr(pipeline, "scatter_svg", broken)
    with pytest.raises(PipelineError) as info:
        run_pipeline(stub_config)
    assert info.value.stage == "report"
    out = Path(stub_config.output_dir)
    assert not out.exists()
    assert not any(p.name.startswith(".staging-") for p in out.parent.iterdir())


@pytest.fixture(scope="module")
def grid(tmp_path_factory, synthetic, synthetic_corpus):
    out = tmp_path_factory.mktemp("grid")
    result = run_grid(PipelineConfig(), ALGORITHMS, SIZES, 3, synthetic_corpus, synthetic.embeddings, out)
    return result, out


def test_grid_shape(grid):
    result, out = grid
    assert len(result.raw) == 27 and len(result.aggregated) == 9
    assert {(r["algorithm"], r["min_cluster_size"]) for r in result.aggregated} == {
        (a, s) for a in ALGORITHMS for s in SIZES}
    assert len({r["seed"] for r in result.raw}) == 3
    assert all(r["error"] == "" for r in result.raw)
    with open(out / "grid.csv", newline="") as fh:
        assert tuple(next(csv.reader(fh))) == GRID_COLUMNS
    with open(out / "grid_runs.csv", newline="") as fh:
        assert tuple(next(csv.reader(fh))) == RAW_COLUMNS


def test_grid_rows_are_recomputable(grid):
    result, out = grid
    rows = read_grid_csv(out / "grid.csv")
    raw = read_grid_csv(out / "grid_runs.csv")
    for row in rows:
        runs = [r for r in raw if r["algorithm"] == row["algorithm"]
                and r["min_cluster_size"] == row["min_cluster_size"]]
        assert row["runs_averaged"] == len(runs) == 3
        for key in ("n_topics", "coherence", "diversity"):
            assert abs(row[key] - statistics.fmean(r[key] for r in runs)) <= 1e-12
        assert abs(row["quality"] - row["coherence"] * row["diversity"]) <= 1e-12
        assert abs(row["granularity"] - row["quality"] * row["n_topics"]) <= 1e-12
        agg = aggregate([EvalReport(r["n_topics"], r["coherence"], r["diversity"]) for r in runs])
        assert agg.quality == row["quality"]


def test_grid_single_run_equals_raw(synthetic, synthetic_corpus):
    result = run_grid(PipelineConfig(), ["hdbscan_eom"], [50, 100], 1, synthetic_corpus, synthetic.embeddings)
    for agg, raw in zip(result.aggregated, result.raw):
        assert agg["runs_averaged"] == 1
        for key in ("n_topics", "coherence", "diversity", "quality", "granularity"):
            assert agg[key] == raw[key]


def test_grid_tolerates_a_failed_run(synthetic, synthetic_corpus, monkeypatch):
    real = pipeline.evaluate
    calls = []

    def flaky(*args, **kwargs):
        calls.append(1)
        if len(calls) == 2:
            raise NoTopics("coherence could not be computed")
        return real(*args, **kwargs)

    monkeypatch.setattr(pipeline, "evaluate", flaky)
    result = run_grid(PipelineConfig(), ["hdbscan_eom"], [50], 3, synthetic_corpus, synthetic.embeddings)
    (row,) = result.aggregated
    assert row["runs_averaged"] == 2
    failed = [r for r in result.raw if r["error"]]
    assert len(failed) == 1 and failed[0]["run"] == 1 and "eval" in failed[0]["error"]
    assert math.isnan(failed[0]["coherence"])
    ok = [r for r in result.raw if not r["error"]]
    assert row["coherence"] == pytest.approx(statistics.fmean(r["coherence"] for r in ok), abs=1e-12)


def test_grid_rejects_zero_runs(synthetic, synthetic_corpus):
    with pytest.raises(ValueError):
        run_grid(PipelineConfig(), ["hdbscan_eom"], [50], 0, synthetic_corpus, synthetic.embeddings)

