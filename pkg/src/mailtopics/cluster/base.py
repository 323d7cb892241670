"""Shared clustering types, canonical relabeling, and CSV export."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

ALGORITHMS = ("hdbscan_eom", "hdbscan_leaf", "optics_xi")


@dataclass(frozen=True)
class ClusterParams:
    algorithm: str
    min_cluster_size: int
    min_samples: int | None = None  # None -> min_cluster_size
    xi: float = 0.05
    metric: str = "euclidean"

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; choose from {ALGORITHMS}")
        if self.min_cluster_size < 2:
            raise ValueError("min_cluster_size must be >= 2")
        if self.min_samples is not None and self.min_samples < 1:
            raise ValueError("min_samples must be >= 1")
        if not 0.0 < self.xi < 1.0:
            raise ValueError("xi must lie in (0, 1)")
        if self.metric != "euclidean":
            raise ValueError("only the euclidean metric is supported in reduced space")

    @property
    def effective_min_samples(self) -> int:
        return self.min_cluster_size if self.min_samples is None else self.min_samples


@dataclass
class CondensedTree:
    """Condensed cluster hierarchy as parallel edge arrays.

    Row ``r`` says that ``child`` (a point id below ``n_points``, otherwise a
    cluster id) left cluster ``parent`` at density level ``lambda_val`` with
    ``child_size`` members. Cluster ``n_points`` is the root.
    """

    n_points: int
    parent: np.ndarray
    child: np.ndarray
    lambda_val: np.ndarray
    child_size: np.ndarray
    birth: dict[int, float] = field(default_factory=dict)
    death: dict[int, float] = field(default_factory=dict)

    @property
    def cluster_ids(self) -> list[int]:
        return sorted(self.birth)

    def children_clusters(self, cluster: int) -> list[int]:
        mask = (self.parent == cluster) & (self.child >= self.n_points)
        return self.child[mask].tolist()


@dataclass
class ClusterAssignment:
    labels: np.ndarray
    params: ClusterParams
    stability: dict[int, float] | None = None
    ordering: np.ndarray | None = None
    reachability: np.ndarray | None = None
    core_distances: np.ndarray | None = None
    predecessor: np.ndarray | None = None
    condensed_tree: CondensedTree | None = None

    @property
    def n_clusters(self) -> int:
        return int(len(np.unique(self.labels[self.labels >= 0])))

    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels[self.labels >= 0], minlength=self.n_clusters)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.labels == cluster)


def relabel_by_size(assignment: ClusterAssignment) -> ClusterAssignment:
    """Renumber clusters 0..k-1 by decreasing size; ties go to the cluster
    holding the smallest document index. Outliers stay -1."""
    labels = np.asarray(assignment.labels)
    found = [c for c in np.unique(labels) if c >= 0]
    key = {c: (-int((labels == c).sum()), int(np.flatnonzero(labels == c)[0])) for c in found}
    mapping = {old: new for new, old in enumerate(sorted(found, key=key.__getitem__))}
    new_labels = np.array([mapping.get(int(l), -1) for l in labels], dtype=np.int64)
    stability = None
    if assignment.stability is not None:
        stability = {mapping[c]: s for c, s in assignment.stability.items() if c in mapping}
    return replace(assignment, labels=new_labels, stability=stability)


def write_assignments_csv(path: str | Path, doc_ids: Sequence[str], labels: Sequence[int]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["doc_id", "label"])
        for doc_id, label in zip(doc_ids, labels):
            w.writerow([doc_id, int(label)])


def read_assignments_csv(path: str | Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    return [r["doc_id"] for r in rows], np.array([int(r["label"]) for r in rows], dtype=np.int64)


def write_reachability_csv(path: str | Path, doc_ids: Sequence[str], assignment: ClusterAssignment) -> None:
    if assignment.ordering is None or assignment.reachability is None:
        raise ValueError("assignment carries no reachability plot")
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["order_index", "doc_id", "reachability"])
        for pos, point in enumerate(assignment.ordering):
            w.writerow([pos, doc_ids[point], repr(float(assignment.reachability[point]))])
