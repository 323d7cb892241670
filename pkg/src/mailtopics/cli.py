"""Command-line entry point: ``mailtopics {synth,ingest,run,grid,eval}``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

from .cluster import ALGORITHMS, read_assignments_csv
from .errors import MailTopicsError, PipelineError
from .evaluation import evaluate
from .ingest import load_corpus, write_corpus_jsonl
from .pipeline import PipelineConfig, run_grid, run_pipeline
from .report import dump_json
from .synth import generate_synthetic_corpus
from .topics import ENGLISH_STOPWORDS, build_topics, load_stopwords, tokenize


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x]


def _str_list(text: str) -> list[str]:
    return [x for x in text.split(",") if x]


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mailtopics", description="Topic discovery for malicious email corpora.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic corpus, embeddings and ground truth")
    s.add_argument("--out", required=True)
    s.add_argument("--templates", type=int, default=12)
    s.add_argument("--docs", type=int, default=100, help="documents per template")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--dim", type=int, default=64)
    s.add_argument("--sigma", type=float, default=0.15)

    i = sub.add_parser("ingest", help="parse and filter raw emails into corpus JSONL")
    i.add_argument("input", help="directory of raw messages or JSONL file")
    i.add_argument("--config")
    i.add_argument("--out", required=True)

    def pipeline_flags(sp):
        sp.add_argument("--config", help="JSON pipeline config")
        sp.add_argument("--corpus", help="raw message directory or JSONL (overrides config)")
        sp.add_argument("--embeddings", help="EMB1 file path or http(s) embedding endpoint")
        sp.add_argument("--seed", type=int, help="master seed")
        sp.add_argument("--stub-labeler", action="store_true", help="label clusters offline from keywords")
        sp.add_argument("--out", help="output directory")

    r = sub.add_parser("run", help="run the full pipeline once")
    pipeline_flags(r)
    r.add_argument("--algorithm", choices=ALGORITHMS)
    r.add_argument("--min-cluster-size", type=int)

    g = sub.add_parser("grid", help="evaluate algorithm x min_cluster_size configurations")
    pipeline_flags(g)
    g.add_argument("--algorithm", type=_str_list, default=list(ALGORITHMS),
                   help="comma-separated algorithms (default: all)")
    g.add_argument("--min-cluster-size", type=_int_list, default=[50, 100, 150],
                   help="comma-separated sizes (default: 50,100,150)")
    g.add_argument("--runs", type=int, default=3)

    e = sub.add_parser("eval", help="score an existing cluster assignment")
    e.add_argument("--config")
    e.add_argument("--corpus", required=True, help="corpus JSONL or raw message directory")
    e.add_argument("--assignments", required=True, help="assignments.csv from a run")
    e.add_argument("--out", required=True)
    return p


def _load_config(args) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "corpus", None):
        cfg.corpus = args.corpus
    emb = getattr(args, "embeddings", None)
    if emb:
        if emb.startswith(("http://", "https://")):
            cfg.provider = dataclasses.replace(cfg.provider, mode="remote", endpoint_url=emb)
        else:
            cfg.provider = dataclasses.replace(cfg.provider, mode="file", file_path=emb)
    if getattr(args, "seed", None) is not None:
        cfg.master_seed = args.seed
    if getattr(args, "stub_labeler", False):
        cfg.labeler = dataclasses.replace(cfg.labeler, mode="stub")
    if getattr(args, "out", None):
        cfg.output_dir = args.out
    return cfg


def cmd_synth(args) -> None:
    corpus = generate_synthetic_corpus(args.templates, args.docs, args.seed, args.dim, args.sigma)
    paths = corpus.write(args.out)
    print(f"wrote {len(corpus.records)} documents to {paths['corpus']}")


def cmd_ingest(args) -> None:
    cfg = _load_config(args)
    try:
        docs, ledger, failures = load_corpus(args.input, cfg.ingest)
    except Exception as exc:
        raise PipelineError("ingest", exc) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus_jsonl(docs, out / "corpus.jsonl")
    dump_json({**ledger.to_dict(), "parse_failures": failures}, out / "ledger.json")
    print(f"kept {ledger.retained_count} of {ledger.input_count} documents")


def cmd_run(args) -> None:
    cfg = _load_config(args)
    if args.algorithm or args.min_cluster_size:
        cfg.cluster = dataclasses.replace(
            cfg.cluster,
            algorithm=args.algorithm or cfg.cluster.algorithm,
            min_cluster_size=args.min_cluster_size or cfg.cluster.min_cluster_size,
        )
    report = run_pipeline(cfg)
    ev = report.eval
    print(f"{report.n_clusters} topics; coherence {ev.coherence_npmi:.4f}, diversity {ev.diversity:.4f}, "
          f"quality {ev.quality:.4f}; outputs in {cfg.output_dir}")


def cmd_grid(args) -> None:
    cfg = _load_config(args)
    result = run_grid(cfg, args.algorithm, args.min_cluster_size, args.runs, out_dir=cfg.output_dir)
    for row in result.aggregated:
        print(f"{row['algorithm']:>13} {row['min_cluster_size']:>5}  topics {row['n_topics']:7.2f}  "
              f"quality {row['quality']:.4f}  runs {row['runs_averaged']}")


def cmd_eval(args) -> None:
    cfg = _load_config(args)
    stop = load_stopwords(cfg.stopwords_path) if cfg.stopwords_path else ENGLISH_STOPWORDS
    try:
        docs, _, _ = load_corpus(args.corpus, cfg.ingest)
        ids, labels = read_assignments_csv(args.assignments)
        by_id = {d.id: d for d in docs}
        tokens = [tokenize(by_id[i].full_text, stop) for i in ids]
        topics = build_topics(tokens, labels)
        report = evaluate([t.words for t in topics], tokens, cfg.eval)
    except Exception as exc:
        raise PipelineError("eval", exc) from exc
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dump_json(report.to_dict(), out / "eval.json")
    print(json.dumps(report.to_dict()))


COMMANDS = {"synth": cmd_synth, "ingest": cmd_ingest, "run": cmd_run, "grid": cmd_grid, "eval": cmd_eval}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        COMMANDS[args.command](args)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (MailTopicsError, ValueError, OSError) as exc:
        print(f"error: [config] {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
