"""Keyword topics from clusters: tokenization, class-based TF-IDF, names, categories."""

from __future__ import annotations

import json
import math
import re
from collections import Counter
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import EmptyVocabulary

TOP_K = 10
_TOKEN = re.compile(r"[^\W_]+")


def load_stopwords(path: str | Path | None = None) -> frozenset[str]:
    """Bundled English list, or one word per line from ``path``."""
    if path is None:
        text = resources.files("mailtopics.data").joinpath("stopwords_en.txt").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return frozenset(w.strip().lower() for w in text.splitlines() if w.strip() and not w.startswith("#"))


ENGLISH_STOPWORDS = load_stopwords()


def tokenize(text: str, stopwords: Iterable[str] = ENGLISH_STOPWORDS) -> list[str]:
    stop = stopwords if isinstance(stopwords, (set, frozenset)) else set(stopwords)
    return [
        tok
        for tok in _TOKEN.findall(text.lower())
        if len(tok) >= 2 and not tok.isdigit() and tok not in stop
    ]


@dataclass
class Vocabulary:
    terms: list[str]
    doc_freq: dict[str, int]

    @classmethod
    def build(cls, docs: Iterable[Sequence[str]]) -> "Vocabulary":
        df: Counter = Counter()
        order: dict[str, None] = {}
        for doc in docs:
            for t in doc:
                order.setdefault(t)
            df.update(set(doc))
        return cls(list(order), dict(df))

    def index(self) -> dict[str, int]:
        return {t: i for i, t in enumerate(self.terms)}


@dataclass
class TopicModel:
    cluster_id: int
    top_terms: list[tuple[str, float]]
    name: str = ""
    semantic_label: str | None = None
    category: str | None = None
    size: int = 0

    def __post_init__(self):
        if not self.name:
            self.name = name_topic([t for t, _ in self.top_terms])

    @property
    def words(self) -> list[str]:
        return [t for t, _ in self.top_terms]


def ctfidf(cluster_docs: Mapping[int, Counter] | Sequence[Counter]) -> dict[int, dict[str, float]]:
    """Class-based TF-IDF: each cluster's concatenated text is one document.

    ``weight(t, c) = tf(t, c) * ln(1 + A / tf(t))`` with ``A`` the mean token
    count per cluster and ``tf(t)`` the term's count over all clusters.
    """
    if not isinstance(cluster_docs, Mapping):
        cluster_docs = dict(enumerate(cluster_docs))
    if not cluster_docs:
        raise EmptyVocabulary("no clusters given")
    totals: Counter = Counter()
    for counts in cluster_docs.values():
        totals.update(counts)
    totals = Counter({t: c for t, c in totals.items() if c > 0})
    if not totals:
        raise EmptyVocabulary("clusters contain no tokens")
    avg = sum(totals.values()) / len(cluster_docs)
    idf = {t: math.log(1.0 + avg / f) for t, f in totals.items()}
    return {
        c: {t: tf * idf[t] for t, tf in counts.items() if tf > 0}
        for c, counts in cluster_docs.items()
    }


def top_terms(weights: Mapping[str, float], k: int = TOP_K) -> list[tuple[str, float]]:
    """Highest-weight terms, ties broken alphabetically."""
    ranked = sorted(((t, w) for t, w in weights.items() if w > 0), key=lambda tw: (-tw[1], tw[0]))
    return ranked[:k]


def name_topic(terms: Sequence[str]) -> str:
    return " ".join(terms[:4])


def build_topics(tokens: Sequence[Sequence[str]], labels: Sequence[int], k: int = TOP_K) -> list[TopicModel]:
    """One :class:`TopicModel` per non-outlier cluster, ordered by cluster id."""
    per_cluster: dict[int, Counter] = {}
    sizes: Counter = Counter()
    for doc, label in zip(tokens, labels):
        label = int(label)
        if label < 0:
            continue
        per_cluster.setdefault(label, Counter()).update(doc)
        sizes[label] += 1
    if not per_cluster:
        return []
    weights = ctfidf(dict(sorted(per_cluster.items())))
    return [TopicModel(c, top_terms(weights[c], k), size=sizes[c]) for c in sorted(weights)]


# --- categories -------------------------------------------------------------

CategoryLexicon = dict[str, list[str]]


def load_lexicon(path: str | Path | None = None) -> CategoryLexicon:
    if path is None:
        text = resources.files("mailtopics.data").joinpath("default_lexicon.json").read_text(encoding="utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    raw = json.loads(text)
    return {str(cat).lower(): [str(w).lower() for w in words] for cat, words in raw.items()}


def save_lexicon(lexicon: CategoryLexicon, path: str | Path) -> None:
    Path(path).write_text(json.dumps(lexicon, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def category_overlaps(words: Iterable[str], lexicon: CategoryLexicon) -> dict[str, int]:
    """Number of ``words`` found in each category's keyword list."""
    words = set(words)
    return {cat: len(words & set(kws)) for cat, kws in lexicon.items()}


def assign_category(topic: TopicModel | Sequence[str], lexicon: CategoryLexicon) -> str | None:
    words = topic.words if isinstance(topic, TopicModel) else list(topic)
    overlaps = category_overlaps(words, lexicon)
    ranked = sorted(overlaps.items(), key=lambda kv: (-kv[1], kv[0]))
    if not ranked or ranked[0][1] == 0:
        return None
    return ranked[0][0]


def build_lexicon(topics: Sequence[TopicModel], category_of: Mapping[int, str | None]) -> CategoryLexicon:
    """Union of each category's member-topic keywords, first-appearance order."""
    by_id = {t.cluster_id: t for t in topics}
    lexicon: CategoryLexicon = {}
    for cluster_id, category in category_of.items():
        if category is None:
            continue
        bucket = lexicon.setdefault(category, [])
        for word in by_id[cluster_id].words:
            word = word.lower()
            if word not in bucket:
                bucket.append(word)
    return lexicon


def merge_lexicons(*lexicons: CategoryLexicon) -> CategoryLexicon:
    out: CategoryLexicon = {}
    for lex in lexicons:
        for cat, words in lex.items():
            bucket = out.setdefault(cat, [])
            bucket.extend(w for w in words if w not in bucket)
    return out
