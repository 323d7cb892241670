"""Short natural-language labels for clusters.

``remote`` posts a filled prompt to a completion endpoint
(``{"prompt", "max_tokens"}`` -> ``{"text"}``); ``stub`` title-cases the top
three keywords and never touches the network; ``replay`` reads labels
recorded earlier from a JSON fixture ``{cluster_id: label}``.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import httpx
import numpy as np

from .errors import ServiceUnavailable
from .topics import TopicModel

log = logging.getLogger(__name__)

DEFAULT_PROMPT = (
    "The following keywords and sample documents come from one cluster of emails.\n"
    "Keywords: [KEYWORDS]\n"
    "Documents:\n[DOCUMENTS]\n"
    "Reply with a short topic label of at most 8 words describing what the emails ask "
    "the recipient to do. Reply with the label only."
)


@dataclass
class LabelerConfig:
    mode: str = "stub"  # remote | stub | replay
    endpoint_url: str | None = None
    prompt_template: str = DEFAULT_PROMPT
    doc_truncate_chars: int = 500
    docs_per_cluster: int = 4
    max_label_words: int = 8
    max_tokens: int = 32
    timeout_s: float = 60.0
    retries: int = 2
    backoff_s: float = 0.5
    fixture_path: str | None = None

    def __post_init__(self):
        if self.mode not in ("remote", "stub", "replay"):
            raise ValueError(f"unknown labeler mode {self.mode!r}")
        if self.doc_truncate_chars < 1 or self.docs_per_cluster < 1:
            raise ValueError("doc_truncate_chars and docs_per_cluster must be >= 1")


def select_representative_docs(members: Sequence[int], reduced_points: np.ndarray, k: int) -> list[int]:
    """The ``k`` members closest to the cluster centroid (ties: lower index first)."""
    members = np.asarray(sorted(int(m) for m in members), dtype=np.int64)
    pts = np.asarray(reduced_points, dtype=np.float64)[members]
    dist = np.linalg.norm(pts - pts.mean(axis=0), axis=1)
    order = np.lexsort((members, dist))
    return members[order[:k]].tolist()


def stub_label(topic: TopicModel | Sequence[str]) -> str:
    words = topic.words if isinstance(topic, TopicModel) else list(topic)
    return " ".join(w.title() for w in words[:3])


def build_prompt(topic: TopicModel, rep_docs: Sequence[str], cfg: LabelerConfig) -> str:
    docs = "\n".join(f"- {d[: cfg.doc_truncate_chars]}" for d in rep_docs[: cfg.docs_per_cluster])
    return cfg.prompt_template.replace("[KEYWORDS]", ", ".join(topic.words)).replace("[DOCUMENTS]", docs)


def clean_completion(text: str, max_words: int) -> str:
    lines = [ln.strip() for ln in text.strip().splitlines() if ln.strip()]
    first = lines[0] if lines else ""
    return " ".join(first.strip("\"' ").split()[:max_words])


def _complete(prompt: str, cfg: LabelerConfig, client: httpx.Client) -> str:
    last: Exception | None = None
    for attempt in range(cfg.retries + 1):
        try:
            resp = client.post(cfg.endpoint_url, json={"prompt": prompt, "max_tokens": cfg.max_tokens})
            if resp.status_code == 200:
                return resp.json()["text"]
            last = ServiceUnavailable(f"HTTP {resp.status_code}")
        except httpx.HTTPError as exc:
            last = exc
        if attempt < cfg.retries and cfg.backoff_s:
            time.sleep(cfg.backoff_s * 2**attempt)
    raise ServiceUnavailable(f"{cfg.endpoint_url}: giving up after {cfg.retries + 1} attempts ({last})")


def load_fixture(path: str | Path) -> dict[int, str]:
    return {int(k): v for k, v in json.loads(Path(path).read_text(encoding="utf-8")).items()}


def label_cluster(topic: TopicModel, rep_docs: Sequence[str], cfg: LabelerConfig,
                  client: httpx.Client | None = None, fixture: dict[int, str] | None = None) -> str:
    if cfg.mode == "stub":
        return stub_label(topic)
    if cfg.mode == "replay":
        fixture = fixture if fixture is not None else load_fixture(cfg.fixture_path)
        return fixture[topic.cluster_id]
    if not cfg.endpoint_url:
        raise ValueError("remote labeling needs endpoint_url")
    prompt = build_prompt(topic, rep_docs, cfg)
    own = client is None
    client = client or httpx.Client(timeout=cfg.timeout_s)
    try:
        return clean_completion(_complete(prompt, cfg, client), cfg.max_label_words)
    finally:
        if own:
            client.close()


def label_topics(topics: Sequence[TopicModel], texts: Sequence[str], labels: np.ndarray,
                 reduced: np.ndarray, cfg: LabelerConfig,
                 client: httpx.Client | None = None) -> list[dict]:
    """Set ``semantic_label`` on each topic; returns fallback records for
    clusters whose remote call failed and got the stub label instead."""
    fallbacks = []
    fixture = load_fixture(cfg.fixture_path) if cfg.mode == "replay" else None
    own = client is None and cfg.mode == "remote"
    if own:
        client = httpx.Client(timeout=cfg.timeout_s)
    try:
        for topic in topics:
            members = np.flatnonzero(labels == topic.cluster_id)
            rep = select_representative_docs(members, reduced, cfg.docs_per_cluster)
            try:
                topic.semantic_label = label_cluster(topic, [texts[i] for i in rep], cfg, client, fixture)
            except ServiceUnavailable as exc:
                log.warning("labeling cluster %d failed, using stub label: %s", topic.cluster_id, exc)
                topic.semantic_label = stub_label(topic)
                fallbacks.append({"cluster_id": topic.cluster_id, "error": str(exc)})
    finally:
        if own:
            client.close()
    return fallbacks
