"""Flat LDA by collapsed Gibbs sampling, and category hierarchies built on it.

The sampler is seeded and sequential, so a given (corpus, params) pair always
yields the same chain. Uniform draws are generated per sweep with numpy and
consumed by a compiled sweep kernel in token order.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numba
import numpy as np

from .errors import EmptyCorpus, EmptyUpdate
from .topics import CategoryLexicon, category_overlaps


@dataclass
class LdaParams:
    n_topics: int = 15
    passes: int = 50
    alpha: float | None = None  # None -> 50 / n_topics
    beta: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if self.n_topics < 1 or self.passes < 1:
            raise ValueError("n_topics and passes must be >= 1")
        if self.alpha is None:
            self.alpha = 50.0 / self.n_topics
        if self.alpha <= 0 or self.beta <= 0:
            raise ValueError("alpha and beta must be positive")


@numba.njit(cache=True)
def _sweep(words, docs, z, n_dk, n_kw, n_k, alpha, beta, uniforms):
    n_topics = n_k.shape[0]
    vbeta = n_kw.shape[1] * beta
    cum = np.empty(n_topics)
    for t in range(words.shape[0]):
        w = words[t]
        d = docs[t]
        k = z[t]
        n_dk[d, k] -= 1
        n_kw[k, w] -= 1
        n_k[k] -= 1
        total = 0.0
        for j in range(n_topics):
            total += (n_dk[d, j] + alpha) * (n_kw[j, w] + beta) / (n_k[j] + vbeta)
            cum[j] = total
        u = uniforms[t] * total
        k = 0
        while k < n_topics - 1 and cum[k] <= u:
            k += 1
        z[t] = k
        n_dk[d, k] += 1
        n_kw[k, w] += 1
        n_k[k] += 1


@dataclass
class LdaModel:
    phi: np.ndarray  # (K, V)
    theta: np.ndarray  # (D, K)
    vocabulary: list[str]
    params: LdaParams
    sweeps_done: int = 0
    updates: int = 0
    # sampler state
    words: np.ndarray = field(repr=False, default=None)
    docs: np.ndarray = field(repr=False, default=None)
    z: np.ndarray = field(repr=False, default=None)
    n_dk: np.ndarray = field(repr=False, default=None)
    n_kw: np.ndarray = field(repr=False, default=None)
    n_k: np.ndarray = field(repr=False, default=None)
    rng: np.random.Generator = field(repr=False, default=None)

    @property
    def n_topics(self) -> int:
        return self.phi.shape[0]

    def _estimate(self) -> None:
        a, b = self.params.alpha, self.params.beta
        phi = self.n_kw + b
        self.phi = phi / phi.sum(axis=1, keepdims=True)
        theta = self.n_dk + a
        self.theta = theta / theta.sum(axis=1, keepdims=True)


def _encode(docs: Sequence[Sequence[str]], vocab: list[str], index: dict[str, int], offset: int):
    words, doc_ids = [], []
    for d, doc in enumerate(docs):
        for tok in doc:
            if tok not in index:
                index[tok] = len(vocab)
                vocab.append(tok)
            words.append(index[tok])
            doc_ids.append(d + offset)
    return np.asarray(words, dtype=np.int64), np.asarray(doc_ids, dtype=np.int64)


def _run(model: LdaModel, passes: int) -> None:
    a, b = model.params.alpha, model.params.beta
    for _ in range(passes):
        _sweep(model.words, model.docs, model.z, model.n_dk, model.n_kw, model.n_k, a, b,
               model.rng.random(len(model.words)))
    model.sweeps_done += passes
    model._estimate()


def fit_lda(docs: Sequence[Sequence[str]], params: LdaParams | None = None) -> LdaModel:
    params = params or LdaParams()
    docs = [list(d) for d in docs]
    if not docs or not any(docs):
        raise EmptyCorpus("no tokens to fit LDA on")
    vocab: list[str] = []
    words, doc_ids = _encode(docs, vocab, {}, 0)
    rng = np.random.default_rng(params.seed)
    k = params.n_topics
    z = rng.integers(0, k, size=len(words)).astype(np.int64)
    n_dk = np.zeros((len(docs), k), dtype=np.int64)
    n_kw = np.zeros((k, len(vocab)), dtype=np.int64)
    np.add.at(n_dk, (doc_ids, z), 1)
    np.add.at(n_kw, (z, words), 1)
    model = LdaModel(
        phi=np.empty((k, len(vocab))), theta=np.empty((len(docs), k)), vocabulary=vocab, params=params,
        words=words, docs=doc_ids, z=z, n_dk=n_dk, n_kw=n_kw, n_k=n_kw.sum(axis=1), rng=rng,
    )
    _run(model, params.passes)
    return model


def update_lda(model: LdaModel, new_docs: Sequence[Sequence[str]]) -> LdaModel:
    """Add documents (and any new words) and resume sampling over everything.

    An empty document list returns an unchanged copy with ``updates`` bumped;
    documents that are all empty raise :class:`EmptyUpdate`.
    """
    new = copy.deepcopy(model)
    new.updates += 1
    new_docs = [list(d) for d in new_docs]
    if not new_docs:
        return new
    if not any(new_docs):
        raise EmptyUpdate("new documents contain no tokens")

    vocab = new.vocabulary
    index = {w: i for i, w in enumerate(vocab)}
    d0 = new.n_dk.shape[0]
    words, doc_ids = _encode(new_docs, vocab, index, d0)
    k = new.n_topics
    z = new.rng.integers(0, k, size=len(words)).astype(np.int64)

    n_kw = np.zeros((k, len(vocab)), dtype=np.int64)
    n_kw[:, : new.n_kw.shape[1]] = new.n_kw
    np.add.at(n_kw, (z, words), 1)
    n_dk = np.vstack([new.n_dk, np.zeros((len(new_docs), k), dtype=np.int64)])
    np.add.at(n_dk, (doc_ids, z), 1)

    new.words = np.concatenate([new.words, words])
    new.docs = np.concatenate([new.docs, doc_ids])
    new.z = np.concatenate([new.z, z])
    new.n_kw, new.n_dk, new.n_k = n_kw, n_dk, n_kw.sum(axis=1)
    _run(new, new.params.passes)
    return new


def extract_topic_words(model: LdaModel, top_n: int = 10) -> list[list[str]]:
    """Per topic, the ``top_n`` most probable words (ties alphabetical)."""
    out = []
    for row in model.phi:
        order = sorted(range(len(row)), key=lambda i: (-row[i], model.vocabulary[i]))
        out.append([model.vocabulary[i] for i in order[:top_n]])
    return out


# --- hierarchy --------------------------------------------------------------

TopicHierarchy = dict[str, list[str]]


def build_hierarchy(topic_words: Sequence[Sequence[str]], lexicon: CategoryLexicon) -> TopicHierarchy:
    """Primary category per topic (largest keyword overlap, ties alphabetical)
    with every other overlapping category as a subtopic, merged over topics.

    The merged result does not depend on topic order: keys are ordered by
    total overlap across all topics, subtopics by their overlap summed over
    topics under that primary, both with alphabetical tie-breaks.
    """
    total: dict[str, int] = {}
    sub_score: dict[str, dict[str, int]] = {}
    for words in topic_words:
        overlaps = category_overlaps(words, lexicon)
        ranked = [(c, n) for c, n in sorted(overlaps.items(), key=lambda kv: (-kv[1], kv[0])) if n > 0]
        if not ranked:
            continue
        for cat, n in ranked:
            total[cat] = total.get(cat, 0) + n
        primary = ranked[0][0]
        subs = sub_score.setdefault(primary, {})
        for cat, n in ranked[1:]:
            subs[cat] = subs.get(cat, 0) + n
    hierarchy: TopicHierarchy = {}
    for primary in sorted(sub_score, key=lambda c: (-total[c], c)):
        subs = sub_score[primary]
        hierarchy[primary] = sorted((s for s in subs if s != primary), key=lambda s: (-subs[s], s))
    return hierarchy


def format_hierarchy(h: Mapping[str, Sequence[str]]) -> str:
    """Render as the mapping text used in reports, e.g. ``{'financial': ['informational']}``."""
    return repr({k: list(v) for k, v in h.items()})


def thematic_hierarchy(docs: Sequence[Sequence[str]], lexicon: CategoryLexicon,
                       params: LdaParams | None = None, top_n: int = 10,
                       model: LdaModel | None = None) -> tuple[TopicHierarchy, LdaModel | None]:
    """Fit (or, given ``model``, update) LDA on ``docs`` and derive the hierarchy."""
    if not any(docs):
        return {}, model
    model = fit_lda(docs, params) if model is None else update_lda(model, docs)
    return build_hierarchy(extract_topic_words(model, top_n), lexicon), model
