"""Density-based clustering of reduced embeddings."""

from .base import (
    ALGORITHMS,
    ClusterAssignment,
    ClusterParams,
    CondensedTree,
    read_assignments_csv,
    relabel_by_size,
    write_assignments_csv,
    write_reachability_csv,
)
from .density_tree import hdbscan
from .ordering import optics


def cluster(points, params: ClusterParams) -> ClusterAssignment:
    """Dispatch on ``params.algorithm``."""
    if params.algorithm == "optics_xi":
        return optics(points, params)
    return hdbscan(points, params)


__all__ = [
    "ALGORITHMS",
    "ClusterAssignment",
    "ClusterParams",
    "CondensedTree",
    "cluster",
    "hdbscan",
    "optics",
    "read_assignments_csv",
    "relabel_by_size",
    "write_assignments_csv",
    "write_reachability_csv",
]
