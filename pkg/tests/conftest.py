import dataclasses

import pytest

from mailtopics.ingest import doc_from_fields, filter_corpus
from mailtopics.pipeline import Corpus, PipelineConfig, derive_seed, reduce_stage
from mailtopics.synth import generate_synthetic_corpus


@pytest.fixture(scope="session")
def synthetic():
    return generate_synthetic_corpus(n_templates=12, docs_per_template=100, seed=0)


@pytest.fixture(scope="session")
def synthetic_corpus(synthetic):
    docs = [doc_from_fields(r["id"], r["subject"], r["body"]) for r in synthetic.records]
    kept, ledger = filter_corpus(docs)
    return Corpus(kept, ledger)


@pytest.fixture(scope="session")
def synthetic_reduced(synthetic):
    """Default-config reduction of the synthetic embeddings, keyed by seed."""
    cache = {}

    def get(seed: int = 0):
        if seed not in cache:
            cfg = PipelineConfig(master_seed=seed)
            cache[seed], _ = reduce_stage(cfg, synthetic.embeddings, derive_seed(seed, "reduce"))
        return cache[seed]

    return get


@pytest.fixture
def stub_config(tmp_path, synthetic):
    paths = synthetic.write(tmp_path / "synthetic")
    cfg = PipelineConfig(corpus=str(paths["corpus"]), output_dir=str(tmp_path / "out"))
    cfg.provider = dataclasses.replace(cfg.provider, mode="file", file_path=str(paths["embeddings"]))
    return cfg


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Record one acceptance criterion's verdict for the end-of-run summary."""

    def record(number: int, ok: bool, detail: str) -> None:
        ACCEPTANCE[number] = (bool(ok), detail)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
