"""Dimensionality reduction ahead of density clustering.

Two methods share one entry point, :func:`reduce`:

``pca``
    Exact projection onto the leading principal directions, with each
    component's sign fixed so its largest-magnitude coordinate is positive.

``neighbor_embed``
    A seeded k-nearest-neighbour graph layout: fuzzy neighbour weights are
    computed from a smooth-kNN calibration, then a low-dimensional layout is
    optimized by edge-sampled SGD with negative sampling (the same family of
    objective as UMAP). Initialized from the PCA projection.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numba
import numpy as np
from scipy.optimize import curve_fit

from .embeddings import EmbeddingMatrix
from .errors import KTooLarge, RankDeficientWarning, TooFewRows

log = logging.getLogger(__name__)


@dataclass
class ReduceConfig:
    method: str = "neighbor_embed"  # pca | neighbor_embed
    n_components: int = 5
    n_neighbors: int = 15
    seed: int | None = None
    metric: str = "cosine"  # cosine | euclidean
    n_epochs: int | None = None
    min_dist: float = 0.1

    def __post_init__(self):
        if self.method not in ("pca", "neighbor_embed"):
            raise ValueError(f"unknown reduction method {self.method!r}")
        if self.metric not in ("cosine", "euclidean"):
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.n_components < 1:
            raise ValueError("n_components must be >= 1")
        if self.n_neighbors < 2:
            raise ValueError("n_neighbors must be >= 2")


@dataclass
class PCAResult:
    projected: np.ndarray
    components: np.ndarray  # (n_components, dim), orthonormal rows
    explained_variance: np.ndarray
    mean: np.ndarray


def prepare(x: np.ndarray, metric: str) -> np.ndarray:
    """Float64 copy of ``x``; rows unit-normalized for the cosine metric."""
    x = np.asarray(x, dtype=np.float64)
    if metric == "cosine":
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        x = x / np.where(norms > 0, norms, 1.0)
    return x


def pca(x: np.ndarray, n_components: int) -> PCAResult:
    x = np.asarray(x, dtype=np.float64)
    n, dim = x.shape
    if n < 2:
        raise TooFewRows(f"pca needs at least 2 rows, got {n}")
    if n_components > dim:
        raise ValueError(f"n_components={n_components} exceeds input dim {dim}")
    mean = x.mean(axis=0)
    centered = x - mean
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    tol = s.max(initial=0.0) * max(n, dim) * np.finfo(np.float64).eps
    rank = int((s > tol).sum())
    if n_components > rank:
        warnings.warn(
            f"requested {n_components} components but data rank is {rank}; reducing to rank",
            RankDeficientWarning,
            stacklevel=2,
        )
        n_components = max(rank, 1)
    comps = vt[:n_components].copy()
    # sign convention: largest-magnitude coordinate of each component positive
    pivot = np.abs(comps).argmax(axis=1)
    signs = np.sign(comps[np.arange(n_components), pivot])
    signs[signs == 0] = 1.0
    comps *= signs[:, None]
    return PCAResult(
        projected=centered @ comps.T,
        components=comps,
        explained_variance=s[:n_components] ** 2 / (n - 1),
        mean=mean,
    )


# --- neighbour-graph layout -------------------------------------------------


def find_ab_params(spread: float = 1.0, min_dist: float = 0.1) -> tuple[float, float]:
    """Fit the low-dimensional similarity curve ``1 / (1 + a d^(2b))``."""

    def curve(x, a, b):
        return 1.0 / (1.0 + a * x ** (2 * b))

    xv = np.linspace(0, spread * 3, 300)
    yv = np.where(xv < min_dist, 1.0, np.exp(-(xv - min_dist) / spread))
    (a, b), _ = curve_fit(curve, xv, yv)
    return float(a), float(b)


def knn(x: np.ndarray, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Exact k nearest neighbours (self excluded), ties broken by index."""
    sq = (x * x).sum(axis=1)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (x @ x.T), 0.0)
    np.fill_diagonal(d2, np.inf)
    idx = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return idx, np.sqrt(np.take_along_axis(d2, idx, axis=1))


def fuzzy_graph(knn_idx: np.ndarray, knn_dist: np.ndarray, n_iter: int = 64) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Symmetrized fuzzy neighbour graph as (heads, tails, weights).

    Each point's bandwidth is chosen by bisection so its outgoing weights sum
    to ``log2(k + 1)``; directed weights are combined by fuzzy union.
    """
    n, k = knn_idx.shape
    target = np.log2(k + 1)
    rho = knn_dist[:, 0]
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    sigma = np.ones(n)
    shifted = np.maximum(knn_dist - rho[:, None], 0.0)
    for _ in range(n_iter):
        total = np.exp(-shifted / sigma[:, None]).sum(axis=1)
        over = total > target
        hi = np.where(over, sigma, hi)
        lo = np.where(over, lo, sigma)
        sigma = np.where(np.isinf(hi), sigma * 2.0, (lo + hi) / 2.0)
    mean_d = knn_dist.mean()
    sigma = np.maximum(sigma, 1e-3 * np.where(knn_dist.mean(axis=1) > 0, knn_dist.mean(axis=1), mean_d))
    w = np.exp(-shifted / sigma[:, None])

    rows = np.repeat(np.arange(n), k)
    cols = knn_idx.ravel()
    vals = w.ravel()
    # fuzzy union of the directed graph with its transpose
    weights: dict[tuple[int, int], float] = {}
    for i, j, v in zip(rows.tolist(), cols.tolist(), vals.tolist()):
        weights[(i, j)] = v
    heads, tails, out = [], [], []
    for (i, j), v in weights.items():
        if (j, i) in weights and j < i:
            continue
        u = weights.get((j, i), 0.0)
        s = v + u - v * u
        heads += [i, j]
        tails += [j, i]
        out += [s, s]
    return np.asarray(heads, dtype=np.int64), np.asarray(tails, dtype=np.int64), np.asarray(out)


@numba.njit(cache=True)
def _xorshift(state):
    x = state[0]
    x ^= (x << np.uint64(13)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    x ^= x >> np.uint64(7)
    x ^= (x << np.uint64(17)) & np.uint64(0xFFFFFFFFFFFFFFFF)
    state[0] = x
    return x


@numba.njit(cache=True)
def _optimize_layout(y, heads, tails, epochs_per_sample, n_epochs, a, b, negative_rate, state):
    n, dim = y.shape
    n_edges = heads.shape[0]
    epochs_per_negative = epochs_per_sample / negative_rate
    next_sample = epochs_per_sample.copy()
    next_negative = epochs_per_negative.copy()
    for epoch in range(n_epochs):
        alpha = 1.0 - epoch / n_epochs
        for e in range(n_edges):
            if next_sample[e] > epoch:
                continue
            i = heads[e]
            j = tails[e]
            d2 = 0.0
            for c in range(dim):
                diff = y[i, c] - y[j, c]
                d2 += diff * diff
            if d2 > 0.0:
                coeff = -2.0 * a * b * d2 ** (b - 1.0) / (a * d2**b + 1.0)
            else:
                coeff = 0.0
            for c in range(dim):
                g = coeff * (y[i, c] - y[j, c])
                if g > 4.0:
                    g = 4.0
                elif g < -4.0:
                    g = -4.0
                y[i, c] += g * alpha
                y[j, c] -= g * alpha
            next_sample[e] += epochs_per_sample[e]

            n_neg = int((epoch - next_negative[e]) / epochs_per_negative[e])
            for _ in range(n_neg):
                k = int(_xorshift(state) % np.uint64(n))
                if k == i:
                    continue
                d2 = 0.0
                for c in range(dim):
                    diff = y[i, c] - y[k, c]
                    d2 += diff * diff
                if d2 > 0.0:
                    coeff = 2.0 * b / ((0.001 + d2) * (a * d2**b + 1.0))
                else:
                    coeff = 0.0
                for c in range(dim):
                    if coeff > 0.0:
                        g = coeff * (y[i, c] - y[k, c])
                        if g > 4.0:
                            g = 4.0
                        elif g < -4.0:
                            g = -4.0
                    else:
                        g = 4.0
                    y[i, c] += g * alpha
            next_negative[e] += n_neg * epochs_per_negative[e]
    return y


def neighbor_embed(x: np.ndarray, n_components: int, n_neighbors: int, seed: int,
                   n_epochs: int | None = None, min_dist: float = 0.1) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n <= n_neighbors:
        raise TooFewRows(f"neighbor_embed needs more than n_neighbors={n_neighbors} rows, got {n}")
    if n_epochs is None:
        n_epochs = 500 if n <= 10_000 else 200
    rng = np.random.default_rng(seed)

    idx, dist = knn(x, n_neighbors - 1)
    heads, tails, w = fuzzy_graph(idx, dist)
    keep = w >= w.max() / n_epochs
    heads, tails, w = heads[keep], tails[keep], w[keep]
    epochs_per_sample = w.max() / w

    init = pca(x, min(n_components, x.shape[1])).projected
    if init.shape[1] < n_components:
        init = np.hstack([init, np.zeros((n, n_components - init.shape[1]))])
    span = np.abs(init).max()
    y = init * (10.0 / span if span > 0 else 1.0)
    y = y + rng.normal(scale=1e-4, size=y.shape)

    a, b = find_ab_params(1.0, min_dist)
    state = np.array([rng.integers(1, 2**63, dtype=np.uint64)], dtype=np.uint64)
    return _optimize_layout(np.ascontiguousarray(y), heads, tails, epochs_per_sample, n_epochs, a, b, 5.0, state)


def trustworthiness(original: np.ndarray, reduced: np.ndarray, k: int) -> float:
    """Neighbourhood-preservation score in [0, 1].

    Every point entering a reduced-space k-neighbourhood without being in the
    original one is penalized by how far down the original ranking it sits.
    """
    original = np.asarray(original, dtype=np.float64)
    reduced = np.asarray(reduced, dtype=np.float64)
    n = original.shape[0]
    if reduced.shape[0] != n:
        raise ValueError("matrices are not row-aligned")
    if k < 1 or k >= n:
        raise KTooLarge(f"k={k} must be in [1, {n - 1}]")

    def ranking(m):
        sq = (m * m).sum(axis=1)
        d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (m @ m.T), 0.0)
        np.fill_diagonal(d2, np.inf)
        return np.argsort(d2, axis=1, kind="stable")

    order_orig = ranking(original)
    ranks = np.empty((n, n), dtype=np.int64)
    rows = np.arange(n)[:, None]
    ranks[rows, order_orig] = np.arange(1, n + 1)[None, :]
    reduced_nn = ranking(reduced)[:, :k]
    excess = ranks[rows, reduced_nn] - k
    penalty = float(excess[excess > 0].sum())
    if penalty == 0.0:
        return 1.0
    # Worst case per point: its k reduced neighbours are the k farthest
    # originals. Equals k(2n - 3k - 1)/2 for k < n/2, the usual normalizer,
    # and stays valid for larger k where that expression degenerates.
    worst = sum(r - k for r in range(max(k + 1, n - k), n))
    return 1.0 - penalty / (n * worst)


def reduce(m: EmbeddingMatrix, cfg: ReduceConfig) -> EmbeddingMatrix:
    x = prepare(m.vectors, cfg.metric)
    if not np.isfinite(x).all():
        raise ValueError("embedding matrix contains non-finite values")
    if cfg.method == "pca":
        if len(x) < max(2, cfg.n_components):
            raise TooFewRows(f"pca to {cfg.n_components} components needs at least that many rows, got {len(x)}")
        out = pca(x, cfg.n_components).projected
    else:
        if cfg.n_components >= x.shape[1]:
            raise ValueError(f"n_components={cfg.n_components} must be below input dim {x.shape[1]}")
        out = neighbor_embed(x, cfg.n_components, cfg.n_neighbors, cfg.seed or 0, cfg.n_epochs, cfg.min_dist)
    return EmbeddingMatrix(out, list(m.doc_ids))
