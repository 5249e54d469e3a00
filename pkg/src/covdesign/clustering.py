"""Cluster partitions and the cluster-level contact summary."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import networkx as nx
from networkx.algorithms.community import louvain_communities

from .graph import Graph

__all__ = [
    "Clustering",
    "ClusterSummary",
    "louvain",
    "build_cluster_summary",
    "read_clustering",
    "write_clustering",
]


class Clustering:
    """Partition of nodes 0..n-1 into clusters 0..K-1 (no empty cluster)."""

    __slots__ = ("assignment", "k")

    def __init__(self, assignment: np.ndarray, k: int):
        assignment = np.asarray(assignment, dtype=np.int64)
        if assignment.ndim != 1 or assignment.size == 0:
            raise ValueError("assignment must be a nonempty 1-d vector")
        counts = np.bincount(assignment, minlength=k)
        if assignment.min() < 0 or assignment.max() >= k or counts.size != k or np.any(counts == 0):
            raise ValueError("cluster ids must cover 0..K-1 with no empty cluster")
        assignment.setflags(write=False)
        self.assignment = assignment
        self.k = int(k)

    @property
    def n(self) -> int:
        return self.assignment.size

    @property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)

    def members(self, cluster: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == cluster)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Clustering)
            and self.k == other.k
            and np.array_equal(self.assignment, other.assignment)
        )

    def __repr__(self) -> str:
        return f"Clustering(n={self.n}, k={self.k})"


@dataclass(frozen=True)
class ClusterSummary:
    """Cluster-level view of a clustered graph.

    ``contact[a, b]`` counts ordered cross-endpoint pairs, i.e. both
    orientations of every undirected edge, so the matrix is symmetric,
    its diagonal is twice the within-cluster edge count, its row sums
    equal the cluster degree vector, and its grand total is 2|E|.
    """

    contact: np.ndarray
    cluster_degrees: np.ndarray
    sizes: np.ndarray
    n: int
    total: float

    @property
    def k(self) -> int:
        return self.contact.shape[0]


def build_cluster_summary(graph: Graph, clustering: Clustering) -> ClusterSummary:
    """Count directed cross/within-cluster edge endpoints for a partition."""
    if clustering.n != graph.n:
        raise ValueError(f"clustering covers {clustering.n} units, graph has {graph.n}")
    k = clustering.k
    a = clustering.assignment[graph.edges[:, 0]]
    b = clustering.assignment[graph.edges[:, 1]]
    contact = np.zeros((k, k), dtype=np.float64)
    np.add.at(contact, (a, b), 1.0)
    np.add.at(contact, (b, a), 1.0)
    contact.setflags(write=False)
    degrees = contact.sum(axis=1)
    degrees.setflags(write=False)
    return ClusterSummary(
        contact=contact,
        cluster_degrees=degrees,
        sizes=clustering.sizes,
        n=graph.n,
        total=float(contact.sum()),
    )


def louvain(graph: Graph, resolution: float = 1.0, seed: int = 0) -> Clustering:
    """Louvain community detection, deterministic for a fixed seed.

    The resolution parameter multiplies the expected-edges term of the
    modularity gain, so larger values produce more, smaller communities.
    A graph with no edges returns singleton clusters.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if graph.num_edges == 0:
        return Clustering(np.arange(graph.n), graph.n)
    g = nx.Graph()
    g.add_nodes_from(range(graph.n))
    g.add_edges_from(map(tuple, graph.edges))
    communities = louvain_communities(g, resolution=resolution, seed=seed)
    # stable ids: order communities by their smallest member
    communities = sorted(communities, key=min)
    assignment = np.empty(graph.n, dtype=np.int64)
    for cid, members in enumerate(communities):
        assignment[list(members)] = cid
    return Clustering(assignment, len(communities))


def write_clustering(clustering: Clustering, path) -> None:
    """Write one ``unit_id cluster_id`` row per unit, sorted by unit."""
    with open(path, "w", encoding="utf-8") as fh:
        for unit, cid in enumerate(clustering.assignment):
            fh.write(f"{unit} {cid}\n")


def read_clustering(path, n: int | None = None) -> Clustering:
    """Read a ``unit_id cluster_id`` file back into a Clustering.

    Every unit 0..n-1 must appear exactly once (n inferred from the file
    when not given).  Non-contiguous cluster ids are remapped to 0..K-1 in
    sorted order with a warning.
    """
    path = str(path)
    seen: dict[int, int] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.strip()
            if not text or text.startswith("#"):
                continue
            tokens = text.split()
            if len(tokens) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'unit_id cluster_id'")
            unit, cid = int(tokens[0]), int(tokens[1])
            if unit in seen:
                raise ValueError(f"{path}: duplicate assignment for unit {unit}")
            seen[unit] = cid
    if not seen:
        raise ValueError(f"{path}: empty clustering file")
    size = n if n is not None else max(seen) + 1
    missing = [u for u in range(size) if u not in seen]
    if missing:
        raise ValueError(f"{path}: no cluster assignment for unit {missing[0]}")
    extra = [u for u in seen if u >= size]
    if extra:
        raise ValueError(f"{path}: unit {extra[0]} outside 0..{size - 1}")
    raw_ids = np.array([seen[u] for u in range(size)], dtype=np.int64)
    unique, assignment = np.unique(raw_ids, return_inverse=True)
    if unique.size != unique.max() + 1 or unique.min() != 0:
        warnings.warn(
            f"{path}: non-contiguous cluster ids remapped to 0..{unique.size - 1}",
            stacklevel=2,
        )
    return Clustering(assignment, unique.size)
