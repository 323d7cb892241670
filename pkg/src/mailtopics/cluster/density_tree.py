"""HDBSCAN* over mutual reachability distances.

Exact O(n^2) construction: dense pairwise distances, Prim's minimum spanning
tree, then a single-linkage hierarchy in which all MST edges of equal weight
merge at once. Processing equal weights together makes the hierarchy a true
level-set tree, so multi-way splits are handled exactly instead of as chains
of zero-length binary splits.
"""

from __future__ import annotations

import numpy as np
from scipy.spatial.distance import cdist

from ..embeddings import EmbeddingMatrix
from ..errors import EmptyInput
from .base import ClusterAssignment, ClusterParams, CondensedTree, relabel_by_size


def pairwise_distances(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    return cdist(x, x)


def core_distances(dist: np.ndarray, min_samples: int) -> np.ndarray:
    """Distance to the ``min_samples``-th nearest neighbour, counting the point itself."""
    k = min(min_samples, dist.shape[0])
    return np.partition(dist, k - 1, axis=1)[:, k - 1]


def mutual_reachability(dist: np.ndarray, core: np.ndarray) -> np.ndarray:
    mr = np.maximum(dist, np.maximum(core[:, None], core[None, :]))
    np.fill_diagonal(mr, 0.0)
    return mr


def prim_mst(weights: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Minimum spanning tree of a dense symmetric graph; ties resolved by lowest index."""
    n = weights.shape[0]
    src = np.zeros(n - 1, dtype=np.int64)
    dst = np.zeros(n - 1, dtype=np.int64)
    wt = np.zeros(n - 1)
    if n < 2:
        return src, dst, wt
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best = weights[0].copy()
    best_from = np.zeros(n, dtype=np.int64)
    best[0] = np.inf
    for step in range(n - 1):
        cand = np.where(in_tree, np.inf, best)
        j = int(np.argmin(cand))
        src[step], dst[step], wt[step] = best_from[j], j, best[j]
        in_tree[j] = True
        closer = (weights[j] < best) & ~in_tree
        best[closer] = weights[j][closer]
        best_from[closer] = j
        best[j] = np.inf
    return src, dst, wt


class _Hierarchy:
    """Level-set single-linkage tree. Nodes below ``n`` are points."""

    def __init__(self, n: int):
        self.n = n
        self.children: list[list[int]] = [[] for _ in range(n)]
        self.weight: list[float] = [0.0] * n
        self.size: list[int] = [1] * n

    def add(self, kids: list[int], w: float) -> int:
        self.children.append(kids)
        self.weight.append(w)
        self.size.append(sum(self.size[k] for k in kids))
        return len(self.children) - 1

    @property
    def root(self) -> int:
        return len(self.children) - 1

    def leaf_ranges(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Leaf order plus [start, end) of each node's leaves in that order."""
        m = len(self.children)
        start = np.zeros(m, dtype=np.int64)
        end = np.zeros(m, dtype=np.int64)
        order: list[int] = []
        stack = [(self.root, False)]
        while stack:
            node, done = stack.pop()
            if node < self.n:
                start[node] = len(order)
                order.append(node)
                end[node] = len(order)
            elif done:
                end[node] = len(order)
            else:
                start[node] = len(order)
                stack.append((node, True))
                stack.extend((k, False) for k in reversed(self.children[node]))
        return np.asarray(order, dtype=np.int64), start, end


def _find(parent: list[int], x: int) -> int:
    while parent[x] != x:
        parent[x] = parent[parent[x]]
        x = parent[x]
    return x


def level_hierarchy(src: np.ndarray, dst: np.ndarray, wt: np.ndarray, n: int) -> _Hierarchy:
    h = _Hierarchy(n)
    parent = list(range(n))
    comp_node = list(range(n))
    order = np.lexsort((np.arange(len(wt)), wt))
    i = 0
    while i < len(order):
        j = i
        while j < len(order) and wt[order[j]] == wt[order[i]]:
            j += 1
        group = order[i:j]
        pre = [(_find(parent, int(src[e])), _find(parent, int(dst[e]))) for e in group]
        local = {r: r for pair in pre for r in pair}

        def lfind(x):
            while local[x] != x:
                local[x] = local[local[x]]
                x = local[x]
            return x

        for a, b in pre:
            ra, rb = lfind(a), lfind(b)
            if ra != rb:
                local[max(ra, rb)] = min(ra, rb)
        merged: dict[int, list[int]] = {}
        for r in sorted(local):
            merged.setdefault(lfind(r), []).append(r)
        for roots in merged.values():
            if len(roots) < 2:
                continue
            node = h.add([comp_node[r] for r in roots], float(wt[order[i]]))
            keep = roots[0]
            for r in roots[1:]:
                parent[r] = keep
            comp_node[keep] = node
        i = j
    return h


def _lambda(w: float) -> float:
    return 1.0 / w if w > 0 else np.inf


def condense(h: _Hierarchy, min_cluster_size: int):
    """Walk the hierarchy top-down keeping only splits into >= 2 large parts.

    Returns the condensed tree, the hierarchy node each cluster was born at,
    and per-cluster stability.
    """
    n = h.n
    leaf_order, start, end = h.leaf_ranges()
    rows: list[tuple[int, int, float, int]] = []
    birth = {n: 0.0}
    death: dict[int, float] = {}
    born_at = {n: h.root}
    next_id = n + 1
    stack = [(h.root, n)] if h.root >= n else []
    while stack:
        node, cluster = stack.pop()
        lam = _lambda(h.weight[node])
        kids = h.children[node]
        big = [k for k in kids if h.size[k] >= min_cluster_size]
        for k in kids:
            if k in big:
                continue
            for p in leaf_order[start[k]:end[k]]:
                rows.append((cluster, int(p), lam, 1))
        if len(big) >= 2:
            death[cluster] = lam
            for k in big:
                new = next_id
                next_id += 1
                birth[new] = lam
                born_at[new] = k
                rows.append((cluster, new, lam, h.size[k]))
                stack.append((k, new))
        elif len(big) == 1:
            stack.append((big[0], cluster))
        else:
            death[cluster] = lam

    if rows:
        arr = list(zip(*rows))
        parent_a = np.asarray(arr[0], dtype=np.int64)
        child_a = np.asarray(arr[1], dtype=np.int64)
        lam_a = np.asarray(arr[2], dtype=np.float64)
        size_a = np.asarray(arr[3], dtype=np.int64)
    else:
        parent_a = child_a = size_a = np.zeros(0, dtype=np.int64)
        lam_a = np.zeros(0)
    tree = CondensedTree(n, parent_a, child_a, lam_a, size_a, birth, death)

    stability = {c: 0.0 for c in birth}
    for p, lam, size in zip(parent_a.tolist(), lam_a.tolist(), size_a.tolist()):
        stability[p] += (lam - birth[p]) * size
    return tree, born_at, stability


def select_clusters(tree: CondensedTree, stability: dict[int, float], method: str) -> list[int]:
    root = tree.n_points
    children = {c: tree.children_clusters(c) for c in tree.cluster_ids}
    if method == "leaf":
        return [c for c in tree.cluster_ids if c != root and not children[c]]

    best = {}
    keep_self = {}
    for c in sorted(tree.cluster_ids, reverse=True):
        if c == root:
            continue
        sub = sum(best[k] for k in children[c])
        if children[c] and sub > stability[c]:
            best[c], keep_self[c] = sub, False
        else:
            best[c], keep_self[c] = stability[c], True
    chosen = []
    stack = list(children[root])
    while stack:
        c = stack.pop()
        if keep_self[c]:
            chosen.append(c)
        else:
            stack.extend(children[c])
    return sorted(chosen)


def hdbscan(points: EmbeddingMatrix | np.ndarray, params: ClusterParams) -> ClusterAssignment:
    if params.algorithm not in ("hdbscan_eom", "hdbscan_leaf"):
        raise ValueError(f"hdbscan cannot run algorithm {params.algorithm!r}")
    x = points.vectors if isinstance(points, EmbeddingMatrix) else points
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise EmptyInput("no points to cluster")

    dist = pairwise_distances(x)
    core = core_distances(dist, params.effective_min_samples)
    mr = mutual_reachability(dist, core)
    src, dst, wt = prim_mst(mr)
    h = level_hierarchy(src, dst, wt, n)
    tree, born_at, stability = condense(h, params.min_cluster_size)
    method = "leaf" if params.algorithm == "hdbscan_leaf" else "eom"
    chosen = select_clusters(tree, stability, method)

    leaf_order, start, end = h.leaf_ranges()
    labels = np.full(n, -1, dtype=np.int64)
    stab = {}
    for label, c in enumerate(chosen):
        node = born_at[c]
        labels[leaf_order[start[node]:end[node]]] = label
        stab[label] = stability[c]
    assignment = ClusterAssignment(labels, params, stability=stab, core_distances=core, condensed_tree=tree)
    return relabel_by_size(assignment)
