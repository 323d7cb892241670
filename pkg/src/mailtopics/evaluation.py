"""Topic quantity, NPMI coherence, diversity, quality, and granularity."""

from __future__ import annotations

import math
import statistics
import warnings
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import DegeneratePairWarning, MixedConfigs, NoTopics


@dataclass
class EvalParams:
    top_n_words: int = 10
    window_size: int = 10
    epsilon: float = 1e-12

    def __post_init__(self):
        if self.top_n_words < 2:
            raise ValueError("top_n_words must be >= 2")
        if self.window_size < 2:
            raise ValueError("window_size must be >= 2")


@dataclass
class EvalReport:
    n_topics: float
    coherence_npmi: float
    diversity: float
    runs_averaged: int = 1
    config: dict = field(default_factory=dict)
    quality: float = field(init=False)
    granularity: float = field(init=False)

    def __post_init__(self):
        self.quality = self.coherence_npmi * self.diversity
        self.granularity = self.n_topics * self.quality

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls(d["n_topics"], d["coherence_npmi"], d["diversity"], d.get("runs_averaged", 1), d.get("config", {}))


def window_counts(reference: Sequence[Sequence[str]], words: Sequence[str], window_size: int):
    """Count sliding windows containing each word and each word pair.

    Windows have stride 1 within a document; a document shorter than the
    window is a single window. Returns ``(n_windows, single[m], joint[m, m])``.
    """
    index = {w: i for i, w in enumerate(dict.fromkeys(words))}
    m = len(index)
    single = np.zeros(m, dtype=np.int64)
    joint = np.zeros((m, m), dtype=np.int64)
    n_windows = 0
    for doc in reference:
        length = len(doc)
        n_win = max(1, length - window_size + 1)
        n_windows += n_win
        hits = [(pos, index[t]) for pos, t in enumerate(doc) if t in index]
        if not hits:
            continue
        present = sorted({u for _, u in hits})
        local = {u: j for j, u in enumerate(present)}
        diff = np.zeros((n_win + 1, len(present)), dtype=np.int64)
        for pos, u in hits:
            lo = max(0, pos - window_size + 1)
            hi = min(pos, n_win - 1)
            diff[lo, local[u]] += 1
            diff[hi + 1, local[u]] -= 1
        inside = (np.cumsum(diff[:-1], axis=0) > 0).astype(np.int64)
        sel = np.asarray(present)
        single[sel] += inside.sum(axis=0)
        joint[np.ix_(sel, sel)] += inside.T @ inside
    return n_windows, single, joint, index


def npmi_pair(p_i: float, p_j: float, p_ij: float, epsilon: float) -> float:
    if p_ij >= 1.0:
        return 1.0  # both words in every window
    return math.log((p_ij + epsilon) / (p_i * p_j)) / -math.log(p_ij + epsilon)


def topic_coherences(topics: Sequence[Sequence[str]], reference: Sequence[Sequence[str]],
                     params: EvalParams | None = None) -> list[float | None]:
    """Mean pairwise NPMI for each topic (``None`` for topics with < 2 words)."""
    params = params or EvalParams()
    topics = [list(t)[: params.top_n_words] for t in topics]
    all_words = [w for t in topics for w in t]
    n_windows, single, joint, index = window_counts(reference, all_words, params.window_size)
    if n_windows == 0:
        raise NoTopics("reference corpus is empty")
    out: list[float | None] = []
    missing = set()
    for words in topics:
        words = list(dict.fromkeys(words))
        if len(words) < 2:
            out.append(None)
            continue
        scores = []
        for a in range(len(words)):
            for b in range(a + 1, len(words)):
                i, j = index[words[a]], index[words[b]]
                if single[i] == 0 or single[j] == 0:
                    missing.update(w for w, k in ((words[a], i), (words[b], j)) if single[k] == 0)
                    scores.append(0.0)
                    continue
                scores.append(npmi_pair(single[i] / n_windows, single[j] / n_windows,
                                        joint[i, j] / n_windows, params.epsilon))
        out.append(float(np.mean(scores)))
    if missing:
        warnings.warn(f"top words absent from reference corpus: {sorted(missing)}", DegeneratePairWarning, stacklevel=2)
    return out


def npmi_coherence(topics: Sequence[Sequence[str]], reference: Sequence[Sequence[str]],
                   params: EvalParams | None = None) -> float:
    if not topics:
        raise NoTopics("no topics to score")
    per_topic = [c for c in topic_coherences(topics, reference, params) if c is not None]
    if not per_topic:
        raise NoTopics("no topic has at least two words")
    return float(np.mean(per_topic))


def topic_diversity(topics: Sequence[Sequence[str]], top_n: int | None = None) -> float:
    lists = [list(t)[:top_n] if top_n else list(t) for t in topics]
    slots = sum(len(t) for t in lists)
    if not lists or slots == 0:
        raise NoTopics("no topic words to score")
    return len({w for t in lists for w in t}) / slots


def evaluate(topics: Sequence[Sequence[str]], reference: Sequence[Sequence[str]],
             params: EvalParams | None = None, config: dict | None = None) -> EvalReport:
    params = params or EvalParams()
    coherence = npmi_coherence(topics, reference, params)
    diversity = topic_diversity(topics, params.top_n_words)
    return EvalReport(len(topics), coherence, diversity, 1, dict(config or {}))


def aggregate(reports: Sequence[EvalReport]) -> EvalReport:
    """Average runs of one configuration; quality and granularity are
    recomputed from the averaged components.

    Means are computed exactly (rational arithmetic, rounded once), so
    averaging identical reports returns the same values.
    """
    if not reports:
        raise ValueError("nothing to aggregate")
    first = reports[0].config
    if any(r.config != first for r in reports[1:]):
        raise MixedConfigs("reports come from different configurations")
    return EvalReport(
        n_topics=float(statistics.mean(r.n_topics for r in reports)),
        coherence_npmi=float(statistics.mean(r.coherence_npmi for r in reports)),
        diversity=float(statistics.mean(r.diversity for r in reports)),
        runs_averaged=len(reports),
        config=dict(first),
    )
