"""End-to-end runs and the clustering-configuration grid.

Stage order: ingest, embeddings, reduce, cluster, topics, labels, eval, lda.
Every stochastic stage draws its seed from the master seed through
:func:`derive_seed`, so a config plus a master seed pins the whole run.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import shutil
import tempfile
import time
import warnings
from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .cluster import ClusterAssignment, ClusterParams, cluster, write_assignments_csv, write_reachability_csv
from .embeddings import EmbeddingMatrix, ProviderConfig, fetch_embeddings, load_embeddings
from .errors import EmptyCorpus, PipelineError, ReductionFallbackWarning
from .evaluation import EvalParams, EvalReport, aggregate, evaluate
from .ingest import EmailDoc, FilterLedger, IngestConfig, load_corpus
from .labeler import LabelerConfig, label_topics
from .lda import LdaParams, thematic_hierarchy
from .reduce import ReduceConfig, prepare, reduce, trustworthiness
from .report import REPORT_COLUMNS, dump_json, report_row, scatter_svg, write_report_csv
from .topics import (
    ENGLISH_STOPWORDS,
    assign_category,
    build_lexicon,
    build_topics,
    load_lexicon,
    load_stopwords,
    merge_lexicons,
    tokenize,
)

log = logging.getLogger(__name__)

_MASK64 = (1 << 64) - 1
STAGE_IDS = {"reduce": 1, "lda": 2, "plot": 3, "run": 4, "synth": 5}
GRID_COLUMNS = ("algorithm", "min_cluster_size", "n_topics", "coherence", "diversity", "quality",
                "granularity", "runs_averaged")
RAW_COLUMNS = ("algorithm", "min_cluster_size", "run", "seed", "n_topics", "coherence", "diversity",
               "quality", "granularity", "error")


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def derive_seed(master: int, stage: str, index: int = 0) -> int:
    return splitmix64(splitmix64(master & _MASK64) ^ splitmix64((STAGE_IDS[stage] << 32) | (index & 0xFFFFFFFF)))


@dataclass
class PipelineConfig:
    corpus: str | None = None
    ingest: IngestConfig = field(default_factory=IngestConfig)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    reduce: ReduceConfig = field(default_factory=ReduceConfig)
    cluster: ClusterParams = field(default_factory=lambda: ClusterParams("hdbscan_eom", 50))
    labeler: LabelerConfig = field(default_factory=LabelerConfig)
    eval: EvalParams = field(default_factory=EvalParams)
    lda: LdaParams = field(default_factory=LdaParams)
    lexicon_path: str | None = None
    stopwords_path: str | None = None
    master_seed: int = 0
    output_dir: str = "out"
    trust_floor: float = 0.80
    trust_k: int = 15
    trust_max_rows: int = 5000
    plot: bool = True

    _SECTIONS = {
        "ingest": IngestConfig, "provider": ProviderConfig, "reduce": ReduceConfig, "cluster": ClusterParams,
        "labeler": LabelerConfig, "eval": EvalParams, "lda": LdaParams,
    }

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        kwargs = {}
        for key, value in d.items():
            section = cls._SECTIONS.get(key)
            kwargs[key] = section(**value) if section and isinstance(value, dict) else value
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

    def snapshot(self) -> dict:
        """Config as recorded in reports (output location excluded)."""
        d = self.to_dict()
        d.pop("output_dir", None)
        return d


@dataclass
class Corpus:
    docs: list[EmailDoc]
    ledger: FilterLedger
    parse_failures: list[dict] = field(default_factory=list)

    @property
    def ids(self) -> list[str]:
        return [d.id for d in self.docs]

    @property
    def texts(self) -> list[str]:
        return [d.full_text for d in self.docs]


@dataclass
class RunReport:
    rows: list[dict]
    eval: EvalReport | None
    ledger: dict
    config: dict
    clusters: list[dict]
    reduction: dict
    labeler_fallbacks: list[dict]
    parse_failures: list[dict]
    assignment: ClusterAssignment | None = field(default=None, repr=False)
    doc_ids: list[str] = field(default_factory=list, repr=False)

    @property
    def n_clusters(self) -> int:
        return len(self.rows)

    def to_dict(self) -> dict:
        return {
            "columns": list(REPORT_COLUMNS),
            "rows": self.rows,
            "clusters": self.clusters,
            "eval": self.eval.to_dict() if self.eval else None,
            "reduction": self.reduction,
            "ledger": self.ledger,
            "labeler_fallbacks": self.labeler_fallbacks,
            "parse_failures": self.parse_failures,
            "config": self.config,
        }


@contextmanager
def _stage(name: str):
    try:
        yield
    except PipelineError:
        raise
    except Exception as exc:
        raise PipelineError(name, exc) from exc


def ingest_stage(cfg: PipelineConfig, corpus: Corpus | None = None) -> Corpus:
    with _stage("ingest"):
        if corpus is None:
            if not cfg.corpus:
                raise ValueError("no corpus given")
            docs, ledger, failures = load_corpus(cfg.corpus, cfg.ingest)
            corpus = Corpus(docs, ledger, failures)
        if not corpus.docs:
            raise EmptyCorpus("no documents left after filtering")
    return corpus


def embed_stage(cfg: PipelineConfig, corpus: Corpus, embeddings: EmbeddingMatrix | None = None) -> EmbeddingMatrix:
    with _stage("embeddings"):
        if embeddings is not None:
            if list(embeddings.doc_ids) != corpus.ids:
                index = {d: i for i, d in enumerate(embeddings.doc_ids)}
                embeddings = embeddings.take([index[i] for i in corpus.ids])
            return embeddings
        if cfg.provider.mode == "remote":
            return fetch_embeddings(corpus.texts, cfg.provider, corpus.ids)
        if not cfg.provider.file_path:
            raise ValueError("file mode needs provider.file_path")
        return load_embeddings(cfg.provider.file_path, corpus.ids)


def reduce_stage(cfg: PipelineConfig, emb: EmbeddingMatrix, seed: int) -> tuple[EmbeddingMatrix, dict]:
    with _stage("reduce"):
        rcfg = dataclasses.replace(cfg.reduce, seed=cfg.reduce.seed if cfg.reduce.seed is not None else seed)
        reduced = reduce(emb, rcfg)
        info = {"method": rcfg.method, "method_used": rcfg.method, "n_components": reduced.dim,
                "seed": rcfg.seed, "trustworthiness": None}
        if rcfg.method == "neighbor_embed":
            original = prepare(emb.vectors, rcfg.metric)
            rows = np.arange(len(original))
            if len(rows) > cfg.trust_max_rows:
                rows = np.linspace(0, len(rows) - 1, cfg.trust_max_rows).astype(np.int64)
            k = min(cfg.trust_k, len(rows) - 1)
            score = trustworthiness(original[rows], reduced.vectors[rows], k)
            info["trustworthiness"] = score
            if score < cfg.trust_floor:
                warnings.warn(f"neighbor_embed trustworthiness {score:.3f} below {cfg.trust_floor}; using pca",
                              ReductionFallbackWarning, stacklevel=2)
                reduced = reduce(emb, dataclasses.replace(rcfg, method="pca"))
                info["method_used"] = "pca"
    return reduced, info


def _stopwords(cfg: PipelineConfig):
    return load_stopwords(cfg.stopwords_path) if cfg.stopwords_path else ENGLISH_STOPWORDS


def score_assignment(cfg: PipelineConfig, tokens: Sequence[Sequence[str]], labels: np.ndarray):
    """Topics plus their evaluation for one clustering."""
    with _stage("topics"):
        topics = build_topics(tokens, labels)
    with _stage("eval"):
        config = {"algorithm": cfg.cluster.algorithm, "min_cluster_size": cfg.cluster.min_cluster_size}
        report = evaluate([t.words for t in topics], tokens, cfg.eval, config)
    return topics, report


def run_pipeline(cfg: PipelineConfig, corpus: Corpus | None = None,
                 embeddings: EmbeddingMatrix | None = None, write: bool = True) -> RunReport:
    """Run every stage; with ``write`` the outputs land in ``cfg.output_dir``.

    Outputs are staged in a temporary directory and only moved into place
    once all stages succeed.
    """
    corpus = ingest_stage(cfg, corpus)
    emb = embed_stage(cfg, corpus, embeddings)
    reduced, reduction = reduce_stage(cfg, emb, derive_seed(cfg.master_seed, "reduce"))

    with _stage("cluster"):
        assignment = cluster(reduced.vectors, cfg.cluster)

    stop = _stopwords(cfg)
    tokens = [tokenize(t, stop) for t in corpus.texts]
    topics, eval_report = score_assignment(cfg, tokens, assignment.labels)

    with _stage("topics"):
        seed_lexicon = load_lexicon(cfg.lexicon_path)
        for t in topics:
            t.category = assign_category(t, seed_lexicon)
        lexicon = merge_lexicons(seed_lexicon, build_lexicon(topics, {t.cluster_id: t.category for t in topics}))

    with _stage("labeler"):
        fallbacks = label_topics(topics, corpus.texts, assignment.labels, reduced.vectors, cfg.labeler)

    hierarchies = {}
    with _stage("lda"):
        lda_seed = derive_seed(cfg.master_seed, "lda")
        for t in topics:
            docs = [tokens[i] for i in assignment.members(t.cluster_id)]
            params = dataclasses.replace(cfg.lda, seed=splitmix64(lda_seed ^ t.cluster_id))
            hierarchies[t.cluster_id], _ = thematic_hierarchy(docs, lexicon, params)

    rows = [report_row(t, hierarchies.get(t.cluster_id)) for t in topics]
    clusters = [
        {"cluster_id": t.cluster_id, "size": t.size, "category": t.category, "name": t.name,
         "semantic_label": t.semantic_label, "keywords": [[w, s] for w, s in t.top_terms],
         "hierarchy": hierarchies.get(t.cluster_id, {})}
        for t in topics
    ]
    report = RunReport(
        rows=rows, eval=eval_report, ledger=corpus.ledger.to_dict(), config=cfg.snapshot(),
        clusters=clusters, reduction=reduction, labeler_fallbacks=fallbacks,
        parse_failures=corpus.parse_failures, assignment=assignment, doc_ids=corpus.ids,
    )
    if write:
        with _stage("report"):
            _write_outputs(cfg, report, emb, lexicon)
    return report


def _write_outputs(cfg: PipelineConfig, report: RunReport, emb: EmbeddingMatrix, lexicon: dict) -> None:
    out = Path(cfg.output_dir)
    out.parent.mkdir(parents=True, exist_ok=True)
    staging = Path(tempfile.mkdtemp(prefix=".staging-", dir=out.parent))
    try:
        dump_json(report.to_dict(), staging / "report.json")
        write_report_csv(report.rows, staging / "report.csv")
        write_assignments_csv(staging / "assignments.csv", report.doc_ids, report.assignment.labels)
        dump_json(report.ledger, staging / "ledger.json")
        dump_json(lexicon, staging / "lexicon.json")
        if report.assignment.ordering is not None:
            write_reachability_csv(staging / "reachability.csv", report.doc_ids, report.assignment)
        if cfg.plot:
            plot_cfg = dataclasses.replace(cfg.reduce, n_components=2, seed=derive_seed(cfg.master_seed, "plot"))
            if report.reduction["method_used"] == "pca":
                plot_cfg = dataclasses.replace(plot_cfg, method="pca")
            xy = reduce(emb, plot_cfg).vectors
            title = f"{cfg.cluster.algorithm} (min cluster size {cfg.cluster.min_cluster_size})"
            (staging / "scatter.svg").write_text(scatter_svg(xy, report.assignment.labels, title), encoding="utf-8")
        dump_json({"created_unix": time.time(), "version": __version__, "output_dir": str(out)},
                  staging / "run_meta.json")
        out.mkdir(parents=True, exist_ok=True)
        for f in staging.iterdir():
            shutil.move(str(f), out / f.name)
    finally:
        shutil.rmtree(staging, ignore_errors=True)


# --- grid -------------------------------------------------------------------


@dataclass
class GridResult:
    aggregated: list[dict]
    raw: list[dict]


def _metric_row(report: EvalReport) -> dict:
    return {"n_topics": report.n_topics, "coherence": report.coherence_npmi, "diversity": report.diversity,
            "quality": report.quality, "granularity": report.granularity}


def run_grid(base: PipelineConfig, algorithms: Sequence[str], sizes: Sequence[int], n_runs: int,
             corpus: Corpus | None = None, embeddings: EmbeddingMatrix | None = None,
             out_dir: str | Path | None = None) -> GridResult:
    """Evaluate every (algorithm, min_cluster_size) pair over ``n_runs`` seeds.

    Labeling and thematic analysis do not affect the metrics and are skipped.
    A failing run is recorded in the raw rows and left out of its average.
    """
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    corpus = ingest_stage(base, corpus)
    emb = embed_stage(base, corpus, embeddings)
    stop = _stopwords(base)
    tokens = [tokenize(t, stop) for t in corpus.texts]

    raw: list[dict] = []
    per_config: dict[tuple[str, int], list[EvalReport]] = {(a, s): [] for a in algorithms for s in sizes}
    for run in range(n_runs):
        run_seed = derive_seed(base.master_seed, "run", run)
        reduced = None
        reduce_error = None
        try:
            reduced, _ = reduce_stage(base, emb, derive_seed(run_seed, "reduce"))
        except PipelineError as exc:
            reduce_error = exc
        for algorithm in algorithms:
            for size in sizes:
                row = {"algorithm": algorithm, "min_cluster_size": size, "run": run, "seed": run_seed,
                       "n_topics": math.nan, "coherence": math.nan, "diversity": math.nan,
                       "quality": math.nan, "granularity": math.nan, "error": ""}
                try:
                    if reduce_error is not None:
                        raise reduce_error
                    cfg = dataclasses.replace(base, cluster=dataclasses.replace(
                        base.cluster, algorithm=algorithm, min_cluster_size=size))
                    with _stage("cluster"):
                        labels = cluster(reduced.vectors, cfg.cluster).labels
                    _, report = score_assignment(cfg, tokens, labels)
                    per_config[(algorithm, size)].append(report)
                    row.update(_metric_row(report))
                except PipelineError as exc:
                    log.warning("grid run %s/%s/%d failed: %s", algorithm, size, run, exc)
                    row["error"] = str(exc)
                raw.append(row)

    aggregated = []
    for (algorithm, size), reports in per_config.items():
        row = {"algorithm": algorithm, "min_cluster_size": size}
        if reports:
            agg = aggregate(reports)
            row.update(_metric_row(agg))
            row["runs_averaged"] = agg.runs_averaged
        else:
            row.update({k: math.nan for k in ("n_topics", "coherence", "diversity", "quality", "granularity")})
            row["runs_averaged"] = 0
        aggregated.append(row)

    result = GridResult(aggregated, raw)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_grid_csv(aggregated, out / "grid.csv", GRID_COLUMNS)
        write_grid_csv(raw, out / "grid_runs.csv", RAW_COLUMNS)
    return result


def _fmt(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def write_grid_csv(rows: Sequence[dict], path: str | Path, columns: Sequence[str]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def read_grid_csv(path: str | Path) -> list[dict]:
    numeric = {"n_topics", "coherence", "diversity", "quality", "granularity"}
    ints = {"min_cluster_size", "runs_averaged", "run", "seed"}
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            out.append({k: float(v) if k in numeric else int(v) if k in ints else v for k, v in rec.items()})
    return out
