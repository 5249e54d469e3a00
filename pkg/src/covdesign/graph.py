"""Undirected simple graphs: file IO, synthetic generators, treatment expansion."""

from __future__ import annotations

import warnings
from typing import TYPE_CHECKING

import numpy as np
import scipy.sparse as sp

if TYPE_CHECKING:
    from .clustering import Clustering

__all__ = [
    "Graph",
    "GraphFormatError",
    "load_edge_list",
    "save_edge_list",
    "generate_sbm",
    "expand_treatment",
]


class GraphFormatError(ValueError):
    """Raised when a graph file cannot be parsed."""


class Graph:
    """Immutable undirected simple graph on nodes 0..n-1.

    Edges are stored as a (m, 2) array of pairs with u < v, sorted
    lexicographically and free of duplicates and self-loops.  Node degrees
    are precomputed; isolated nodes are legal and retained.
    """

    __slots__ = ("n", "edges", "degrees", "labels", "_adjacency")

    def __init__(self, n: int, edges: np.ndarray, labels: np.ndarray | None = None):
        edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if n <= 0:
            raise ValueError("graph must have at least one node")
        if edges.size:
            if edges.min() < 0 or edges.max() >= n:
                raise ValueError("edge endpoint outside 0..n-1")
            if np.any(edges[:, 0] == edges[:, 1]):
                raise ValueError("self-loops are not allowed")
        lo = np.minimum(edges[:, 0], edges[:, 1])
        hi = np.maximum(edges[:, 0], edges[:, 1])
        canon = np.column_stack([lo, hi])
        order = np.lexsort((canon[:, 1], canon[:, 0]))
        canon = canon[order]
        if canon.shape[0] > 1 and np.any(np.all(np.diff(canon, axis=0) == 0, axis=1)):
            raise ValueError("duplicate edges are not allowed")
        canon.setflags(write=False)
        degrees = np.bincount(canon.ravel(), minlength=n).astype(np.int64)
        degrees.setflags(write=False)
        self.n = int(n)
        self.edges = canon
        self.degrees = degrees
        self.labels = None if labels is None else np.asarray(labels)
        self._adjacency = None

    @property
    def num_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def mean_degree(self) -> float:
        return 2.0 * self.num_edges / self.n

    @property
    def adjacency(self) -> sp.csr_matrix:
        """Symmetric CSR adjacency matrix, built lazily and cached."""
        if self._adjacency is None:
            u, v = self.edges[:, 0], self.edges[:, 1]
            data = np.ones(2 * self.num_edges, dtype=np.float64)
            rows = np.concatenate([u, v])
            cols = np.concatenate([v, u])
            self._adjacency = sp.csr_matrix(
                (data, (rows, cols)), shape=(self.n, self.n)
            )
        return self._adjacency

    def neighbor_sums(self, values: np.ndarray) -> np.ndarray:
        """Return, per node, the sum of `values` over its neighbors."""
        return self.adjacency @ np.asarray(values, dtype=np.float64)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Graph)
            and self.n == other.n
            and np.array_equal(self.edges, other.edges)
        )

    def __repr__(self) -> str:
        return f"Graph(n={self.n}, edges={self.num_edges})"


def _parse_plain_edge_list(lines) -> tuple[int, np.ndarray, np.ndarray, int, int]:
    raw_pairs = []
    seen: dict[int, None] = {}
    self_loops = 0
    for lineno, raw in lines:
        text = raw.strip()
        if not text or text.startswith("#"):
            continue
        tokens = text.split()
        if len(tokens) != 2:
            raise GraphFormatError(f"line {lineno}: expected 'u v', got {text!r}")
        try:
            a, b = int(tokens[0]), int(tokens[1])
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer node id in {text!r}")
        if a < 0 or b < 0:
            raise GraphFormatError(f"line {lineno}: negative node id in {text!r}")
        seen.setdefault(a)
        seen.setdefault(b)
        if a == b:
            self_loops += 1
            continue
        raw_pairs.append((a, b))
    n = len(seen)
    # keep canonical id spaces intact: 0-based stays put, 1-based shifts
    # down; anything else is renumbered in order of first appearance
    ids = sorted(seen)
    if ids and ids[0] == 0 and ids[-1] == n - 1:
        index = {node: node for node in ids}
    elif ids and ids[0] == 1 and ids[-1] == n:
        index = {node: node - 1 for node in ids}
    else:
        index = {node: pos for pos, node in enumerate(seen)}
    labels = np.empty(n, dtype=np.int64)
    for node, pos in index.items():
        labels[pos] = node
    pairs = [(index[a], index[b]) for a, b in raw_pairs]
    edges, duplicates = _dedupe(np.asarray(pairs, dtype=np.int64).reshape(-1, 2))
    return n, edges, labels, self_loops, duplicates


def _parse_matrix_market(lines) -> tuple[int, np.ndarray, np.ndarray, int, int]:
    header = None
    size = None
    pairs = []
    self_loops = 0
    for lineno, raw in lines:
        text = raw.strip()
        if not text:
            continue
        if header is None:
            if not text.startswith("%%MatrixMarket"):
                raise GraphFormatError(f"line {lineno}: missing %%MatrixMarket header")
            fields = text.split()
            if len(fields) < 5 or fields[1] != "matrix" or fields[2] != "coordinate":
                raise GraphFormatError(f"line {lineno}: unsupported header {text!r}")
            header = fields
            if fields[3] not in ("pattern", "integer", "real"):
                raise GraphFormatError(f"line {lineno}: unsupported field {fields[3]!r}")
            if fields[4] not in ("symmetric", "general"):
                raise GraphFormatError(f"line {lineno}: unsupported symmetry {fields[4]!r}")
            continue
        if text.startswith("%"):
            continue
        tokens = text.split()
        if size is None:
            if len(tokens) != 3:
                raise GraphFormatError(f"line {lineno}: expected 'rows cols nnz'")
            rows, cols, _ = (int(t) for t in tokens)
            if rows != cols:
                raise GraphFormatError(f"line {lineno}: matrix must be square, got {rows}x{cols}")
            size = rows
            continue
        if len(tokens) < 2:
            raise GraphFormatError(f"line {lineno}: expected 'i j [value]', got {text!r}")
        try:
            a, b = int(tokens[0]) - 1, int(tokens[1]) - 1
        except ValueError:
            raise GraphFormatError(f"line {lineno}: non-integer entry in {text!r}")
        if a < 0 or b < 0 or a >= size or b >= size:
            raise GraphFormatError(f"line {lineno}: entry ({a + 1}, {b + 1}) outside 1..{size}")
        if a == b:
            self_loops += 1
            continue
        pairs.append((a, b))
    if header is None or size is None:
        raise GraphFormatError("truncated MatrixMarket file")
    edges, duplicates = _dedupe(np.asarray(pairs, dtype=np.int64).reshape(-1, 2))
    return size, edges, np.arange(size, dtype=np.int64), self_loops, duplicates


def _dedupe(pairs: np.ndarray) -> tuple[np.ndarray, int]:
    if pairs.size == 0:
        return pairs, 0
    lo = np.minimum(pairs[:, 0], pairs[:, 1])
    hi = np.maximum(pairs[:, 0], pairs[:, 1])
    canon = np.unique(np.column_stack([lo, hi]), axis=0)
    return canon, pairs.shape[0] - canon.shape[0]


def load_edge_list(path, fmt: str = "auto") -> Graph:
    """Load a graph from a plain edge list or MatrixMarket file.

    Plain lists: one whitespace-separated ``u v`` pair per line, ``#``
    comments ignored, node ids remapped to 0..n-1 in order of first
    appearance (original ids kept in ``Graph.labels``).  MatrixMarket:
    1-based coordinate entries, ``pattern``/``symmetric`` kinds accepted;
    the declared dimension fixes n, so isolated nodes survive.  Self-loops
    and duplicate edges are dropped with a counted warning.
    """
    path = str(path)
    with open(path, "r", encoding="utf-8") as fh:
        lines = list(enumerate(fh, start=1))
    if fmt == "auto":
        first = next((t for _, t in lines if t.strip()), "")
        fmt = "matrix-market" if first.startswith("%%MatrixMarket") else "edgelist"
    if fmt in ("edgelist", "plain-edge-list"):
        n, edges, labels, self_loops, duplicates = _parse_plain_edge_list(lines)
    elif fmt == "matrix-market":
        n, edges, labels, self_loops, duplicates = _parse_matrix_market(lines)
    else:
        raise ValueError(f"unknown edge-list format {fmt!r}")
    if self_loops or duplicates:
        warnings.warn(
            f"{path}: dropped {self_loops} self-loop(s) and {duplicates} duplicate edge(s)",
            stacklevel=2,
        )
    if edges.shape[0] == 0:
        raise GraphFormatError(f"{path}: empty edge set")
    if np.array_equal(labels, np.arange(n)):
        labels = None
    return Graph(n, edges, labels=labels)


def save_edge_list(graph: Graph, path) -> None:
    """Write the canonical plain edge-list form (sorted ``u v`` lines)."""
    with open(path, "w", encoding="utf-8") as fh:
        for u, v in graph.edges:
            fh.write(f"{u} {v}\n")


def generate_sbm(blocks, p_in: float, p_out: float, seed: int):
    """Sample a stochastic block model graph with its planted partition.

    Every within-block pair is an edge with probability `p_in`, every
    cross-block pair with probability `p_out`.  Deterministic for a fixed
    seed.  Returns ``(Graph, Clustering)`` where the clustering is the
    planted block structure.
    """
    from .clustering import Clustering

    sizes = [int(b) for b in blocks]
    if not sizes or any(b <= 0 for b in sizes):
        raise ValueError("blocks must be a nonempty list of positive sizes")
    if not (0.0 <= p_out <= p_in <= 1.0):
        raise ValueError("require 0 <= p_out <= p_in <= 1")
    n = sum(sizes)
    assignment = np.repeat(np.arange(len(sizes)), sizes)
    rng = np.random.default_rng(seed)
    iu, ju = np.triu_indices(n, k=1)
    prob = np.where(assignment[iu] == assignment[ju], p_in, p_out)
    keep = rng.random(iu.size) < prob
    edges = np.column_stack([iu[keep], ju[keep]])
    return Graph(n, edges), Clustering(assignment, len(sizes))


def expand_treatment(t: np.ndarray, clustering: "Clustering") -> np.ndarray:
    """Broadcast a cluster-level 0/1 vector to unit level (z_i = t_{k(i)})."""
    t = np.asarray(t, dtype=np.float64)
    if t.shape != (clustering.k,):
        raise ValueError(f"treatment length {t.shape} != cluster count {clustering.k}")
    return t[clustering.assignment]
