"""OPTICS ordering and xi-steep cluster extraction.

The ordering is built by repeatedly taking the unprocessed point with the
smallest reachability (lowest index on ties); the first point of every
connected component gets reachability ``inf``. Clusters are then read off the
reachability plot from matching steep-down / steep-up areas, with the two
corrections to the original formulation that are now standard: a steep
downward point satisfies ``r(p) * (1 - xi) >= r(p + 1)``, and the right-hand
cluster border search compares against ``r(sD)`` with ``>``.
"""

from __future__ import annotations

import numpy as np

from ..embeddings import EmbeddingMatrix
from ..errors import EmptyInput
from .base import ClusterAssignment, ClusterParams, relabel_by_size
from .density_tree import core_distances, pairwise_distances


def optics_ordering(dist: np.ndarray, min_samples: int):
    """Return (ordering, reachability, core distances, predecessor), all point-indexed
    except ``ordering``."""
    n = dist.shape[0]
    core = core_distances(dist, min_samples)
    reach = np.full(n, np.inf)
    pred = np.full(n, -1, dtype=np.int64)
    processed = np.zeros(n, dtype=bool)
    ordering = np.empty(n, dtype=np.int64)
    for pos in range(n):
        cand = np.where(processed, np.inf, reach)
        point = int(np.argmin(cand))
        if np.isinf(cand[point]):
            # argmin of an all-inf row returns 0; take the first unprocessed point
            point = int(np.flatnonzero(~processed)[0])
        processed[point] = True
        ordering[pos] = point
        new_reach = np.maximum(dist[point], core[point])
        better = (new_reach < reach) & ~processed
        reach[better] = new_reach[better]
        pred[better] = point
    return ordering, reach, core, pred


def _extend_region(steep: np.ndarray, xward: np.ndarray, start: int, min_samples: int) -> int:
    """Last index of the steep area beginning at ``start``.

    The area may contain at most ``min_samples`` consecutive points that are
    not steep but still go the same direction; a point going the other way
    ends it.
    """
    n = len(steep)
    non_xward = 0
    end = start
    index = start
    while index < n:
        if steep[index]:
            non_xward = 0
            end = index
        elif not xward[index]:
            non_xward += 1
            if non_xward > min_samples:
                break
        else:
            return end
        index += 1
    return end


def _filter_sdas(sdas: list[dict], mib: float, xi_complement: float, r: np.ndarray) -> list[dict]:
    if np.isinf(mib):
        return []
    kept = [d for d in sdas if mib <= r[d["start"]] * xi_complement]
    for d in kept:
        d["mib"] = max(d["mib"], mib)
    return kept


def _correct_predecessor(r, pred_plot, ordering, s, e):
    # trim the cluster end until its last point's predecessor lies inside it
    while s < e:
        if r[s] > r[e]:
            return s, e
        p_e = pred_plot[e]
        if p_e in set(ordering[s:e].tolist()):
            return s, e
        e -= 1
    return None, None


def xi_clusters(reach_plot: np.ndarray, pred_plot: np.ndarray, ordering: np.ndarray,
                xi: float, min_samples: int, min_cluster_size: int) -> list[tuple[int, int]]:
    """Candidate clusters as inclusive (start, end) positions in the ordering,
    inner (smaller) clusters listed before the clusters enclosing them."""
    r = np.hstack((reach_plot, np.inf))
    xi_complement = 1.0 - xi
    sdas: list[dict] = []
    clusters: list[tuple[int, int]] = []
    index = 0
    mib = 0.0
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = r[:-1] / r[1:]
        steep_up = ratio <= xi_complement
        steep_down = ratio >= 1.0 / xi_complement
        down = ratio > 1
        up = ratio < 1

    for steep_index in np.flatnonzero(steep_up | steep_down):
        if steep_index < index:
            continue
        mib = max(mib, np.max(r[index: steep_index + 1]))

        if steep_down[steep_index]:
            sdas = _filter_sdas(sdas, mib, xi_complement, r)
            d_end = _extend_region(steep_down, up, steep_index, min_samples)
            sdas.append({"start": int(steep_index), "end": d_end, "mib": 0.0})
            index = d_end + 1
            mib = r[index]
            continue

        sdas = _filter_sdas(sdas, mib, xi_complement, r)
        u_start = int(steep_index)
        u_end = _extend_region(steep_up, down, u_start, min_samples)
        index = u_end + 1
        mib = r[index]

        found = []
        for d in sdas:
            c_start, c_end = d["start"], u_end
            if r[c_end + 1] * xi_complement < d["mib"]:
                continue
            d_max = r[d["start"]]
            if d_max * xi_complement >= r[c_end + 1]:
                while r[c_start + 1] > r[c_end + 1] and c_start < d["end"]:
                    c_start += 1
            elif r[c_end + 1] * xi_complement >= d_max:
                while r[c_end - 1] > d_max and c_end > u_start:
                    c_end -= 1
            c_start, c_end = _correct_predecessor(r, pred_plot, ordering, c_start, c_end)
            if c_start is None:
                continue
            if c_end - c_start + 1 < min_cluster_size:
                continue
            if c_start > d["end"] or c_end < u_start:
                continue
            found.append((int(c_start), int(c_end)))
        found.reverse()
        clusters.extend(found)
    return clusters


def optics(points: EmbeddingMatrix | np.ndarray, params: ClusterParams) -> ClusterAssignment:
    if params.algorithm != "optics_xi":
        raise ValueError(f"optics cannot run algorithm {params.algorithm!r}")
    x = points.vectors if isinstance(points, EmbeddingMatrix) else points
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if n == 0:
        raise EmptyInput("no points to cluster")

    min_samples = params.effective_min_samples
    dist = pairwise_distances(x)
    ordering, reach, core, pred = optics_ordering(dist, min_samples)
    spans = xi_clusters(reach[ordering], pred[ordering], ordering, params.xi, min_samples, params.min_cluster_size)

    by_position = np.full(n, -1, dtype=np.int64)
    label = 0
    for start, end in spans:
        if np.all(by_position[start:end + 1] == -1):
            by_position[start:end + 1] = label
            label += 1
    labels = np.empty(n, dtype=np.int64)
    labels[ordering] = by_position
    assignment = ClusterAssignment(labels, params, ordering=ordering, reachability=reach,
                                   core_distances=core, predecessor=pred)
    return relabel_by_size(assignment)
