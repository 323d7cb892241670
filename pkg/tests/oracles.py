"""Brute-force reference computations used as test oracles.

Nothing here imports from ``mailtopics``; each oracle works from the
definitions directly, trading speed for obviousness.
"""

from __future__ import annotations

import itertools
import math

import numpy as np


# --- HDBSCAN* ---------------------------------------------------------------


def mutual_reachability_matrix(points: np.ndarray, min_samples: int) -> np.ndarray:
    n = len(points)
    d = np.array([[math.dist(points[i], points[j]) for j in range(n)] for i in range(n)])
    k = min(min_samples, n)
    core = [sorted(d[i])[k - 1] for i in range(n)]  # the point itself is the first neighbour
    return np.array([[0.0 if i == j else max(core[i], core[j], d[i, j]) for j in range(n)] for i in range(n)])


def _components(members: list[int], mr: np.ndarray, below: float) -> list[list[int]]:
    """Connected components of ``members`` using edges strictly lighter than ``below``."""
    left = set(members)
    comps = []
    while left:
        start = min(left)
        seen, stack = {start}, [start]
        while stack:
            u = stack.pop()
            for v in list(left - seen):
                if mr[u, v] < below:
                    seen.add(v)
                    stack.append(v)
        left -= seen
        comps.append(sorted(seen))
    return comps


def hdbscan_oracle(points: np.ndarray, min_cluster_size: int, min_samples: int | None = None,
                   method: str = "eom") -> np.ndarray:
    """Labels from the level-set cluster tree of the full mutual-reachability graph.

    Walks density levels from the top; a cluster splits when two or more
    components of size >= min_cluster_size appear below a level, shrinks
    when only one does, and vanishes when none does. Selection is an
    exhaustive search over antichains (eom) or the set of leaves (leaf).
    """
    n = len(points)
    ms = min_cluster_size if min_samples is None else min_samples
    mr = mutual_reachability_matrix(points, ms)
    levels = sorted({mr[i, j] for i in range(n) for j in range(i + 1, n)}, reverse=True)

    clusters = []  # dicts: members, birth, stability, parent, children

    def lam(w):
        return math.inf if w == 0 else 1.0 / w

    def grow(members, birth, parent, level_idx):
        cid = len(clusters)
        clusters.append({"members": members, "birth": birth, "stability": 0.0, "parent": parent, "children": []})
        if parent is not None:
            clusters[parent]["children"].append(cid)
        current = members
        for w in levels[level_idx:]:
            if max(mr[u, v] for u in current for v in current) < w:
                continue  # no edge at this level inside the cluster
            comps = _components(current, mr, w)
            big = [c for c in comps if len(c) >= min_cluster_size]
            small_pts = sum(len(c) for c in comps if len(c) < min_cluster_size)
            clusters[cid]["stability"] += small_pts * (lam(w) - birth)
            if len(big) >= 2:
                clusters[cid]["stability"] += sum(len(c) for c in big) * (lam(w) - birth)
                nxt = levels.index(w) + 1
                for c in big:
                    grow(c, lam(w), cid, nxt)
                return
            if not big:
                return
            current = big[0]
        # single points remain: they leave at the last level, already handled above

    grow(list(range(n)), 0.0, None, 0)

    non_root = list(range(1, len(clusters)))

    def is_ancestor(a, b):
        p = clusters[b]["parent"]
        while p is not None:
            if p == a:
                return True
            p = clusters[p]["parent"]
        return False

    if method == "leaf":
        chosen = [c for c in non_root if not clusters[c]["children"]]
    else:
        best, chosen = -1.0, []
        for r in range(len(non_root) + 1):
            for subset in itertools.combinations(non_root, r):
                if any(is_ancestor(a, b) or is_ancestor(b, a) for a, b in itertools.combinations(subset, 2)):
                    continue
                total = sum(clusters[c]["stability"] for c in subset)
                if total > best + 1e-12:
                    best, chosen = total, list(subset)
    labels = -np.ones(n, dtype=np.int64)
    groups = sorted((clusters[c]["members"] for c in chosen), key=lambda m: (-len(m), min(m)))
    for k, members in enumerate(groups):
        labels[members] = k
    return labels


# --- trustworthiness --------------------------------------------------------


def trustworthiness_oracle(x: np.ndarray, y: np.ndarray, k: int) -> float:
    n = len(x)
    dx = np.array([[math.dist(x[i], x[j]) for j in range(n)] for i in range(n)])
    dy = np.array([[math.dist(y[i], y[j]) for j in range(n)] for i in range(n)])
    penalty = 0.0
    for i in range(n):
        others = [j for j in range(n) if j != i]
        rank_x = {j: r + 1 for r, j in enumerate(sorted(others, key=lambda j: (dx[i, j], j)))}
        nn_y = sorted(others, key=lambda j: (dy[i, j], j))[:k]
        penalty += sum(max(0, rank_x[j] - k) for j in nn_y)
    if penalty == 0:
        return 1.0
    # largest possible per-point penalty: the k worst-ranked originals
    worst = sum(sorted((max(0, r - k) for r in range(1, n)), reverse=True)[:k])
    return 1.0 - penalty / (n * worst)


# --- NPMI ---------------------------------------------------------------------


def windows(doc: list[str], size: int) -> list[set[str]]:
    if len(doc) <= size:
        return [set(doc)]
    return [set(doc[s:s + size]) for s in range(len(doc) - size + 1)]


def npmi_oracle(topics: list[list[str]], reference: list[list[str]], size: int, eps: float) -> float:
    wins = [w for doc in reference for w in windows(doc, size)]
    total = len(wins)
    scores = []
    for topic in topics:
        pair_scores = []
        for a, b in itertools.combinations(topic, 2):
            p_a = sum(a in w for w in wins) / total
            p_b = sum(b in w for w in wins) / total
            p_ab = sum(a in w and b in w for w in wins) / total
            if p_ab == 1.0:
                pair_scores.append(1.0)
            else:
                pair_scores.append(math.log((p_ab + eps) / (p_a * p_b)) / -math.log(p_ab + eps))
        scores.append(sum(pair_scores) / len(pair_scores))
    return sum(scores) / len(scores)


# --- PCA ----------------------------------------------------------------------


def covariance_eigen(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and eigenvectors of the sample covariance."""
    centered = x - x.mean(axis=0)
    cov = centered.T @ centered / (len(x) - 1)
    vals, vecs = np.linalg.eigh(cov)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


# --- LDA ----------------------------------------------------------------------


def lda_log_joint(z, words, docs, n_docs, n_words, k, alpha, beta) -> float:
    """log p(w, z) of the collapsed LDA model for one full assignment."""
    n_dk = np.zeros((n_docs, k))
    n_kw = np.zeros((k, n_words))
    for t, topic in enumerate(z):
        n_dk[docs[t], topic] += 1
        n_kw[topic, words[t]] += 1
    total = 0.0
    for d in range(n_docs):
        total += sum(math.lgamma(c + alpha) for c in n_dk[d]) - math.lgamma(n_dk[d].sum() + k * alpha)
    for j in range(k):
        total += sum(math.lgamma(c + beta) for c in n_kw[j]) - math.lgamma(n_kw[j].sum() + n_words * beta)
    return total


def lda_coassignment(words, docs, n_docs, n_words, k, alpha, beta) -> np.ndarray:
    """Exact posterior probability that tokens i and j share a topic (tiny inputs only)."""
    states = [np.array(z) for z in itertools.product(range(k), repeat=len(words))]
    logp = np.array([lda_log_joint(z, words, docs, n_docs, n_words, k, alpha, beta) for z in states])
    p = np.exp(logp - logp.max())
    p /= p.sum()
    return sum(pi * (z[:, None] == z[None]) for pi, z in zip(p, states))


def best_word_partition(words, docs, n_docs, n_words, alpha, beta) -> frozenset[int]:
    """Among assignments that put every token of a word in the same one of two
    topics, the word set of the most probable one (the side holding word 0)."""
    best, best_set = -math.inf, None
    for mask in range(2 ** (n_words - 1)):
        side = [(mask >> w) & 1 if w < n_words - 1 else 0 for w in range(n_words)]
        z = [side[w] for w in words]
        score = lda_log_joint(z, words, docs, n_docs, n_words, 2, alpha, beta)
        if score > best:
            best, best_set = score, frozenset(w for w in range(n_words) if side[w] == side[0])
    return best_set
