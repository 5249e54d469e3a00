"""Cluster-level randomization schemes with exactly known covariance.

Every design assigns each cluster treatment with marginal probability 1/2
and can sample a 0/1 cluster vector from an externally supplied random
generator.  Designs also expose their exact covariance matrix, and - where
mathematically possible - their full outcome distribution for enumeration
oracles.
"""

from __future__ import annotations

import hashlib
from math import comb
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import connected_components

from .clustering import ClusterSummary
from .orthant import MAX_EXACT_SIGN_DIM, sign_pattern_probabilities

__all__ = [
    "Design",
    "DesignEnumerationError",
    "BernoulliDesign",
    "CompleteDesign",
    "BlockDesign",
    "SignGaussianDesign",
    "build_ibr_blocks",
    "make_design",
    "enumerate_patterns",
    "DESIGN_KINDS",
]

DESIGN_KINDS = ("ber", "cr", "ibr", "ocd")

_ALIASES = {
    "ber": "ber",
    "bernoulli": "ber",
    "cr": "cr",
    "complete": "cr",
    "ibr": "ibr",
    "ocd": "ocd",
    "optimized": "ocd",
}


class DesignEnumerationError(ValueError):
    """Raised when a design cannot expose exact outcome probabilities."""


def enumerate_patterns(k: int) -> np.ndarray:
    """All 2^k binary vectors; bit b of row index i gives column b."""
    idx = np.arange(2**k)
    return ((idx[:, None] >> np.arange(k)) & 1).astype(np.float64)


def _balanced_subset_probs(m: int) -> dict[int, float]:
    """Treated-count distribution of complete randomization on m clusters."""
    if m == 1:
        return {0: 0.5, 1: 0.5}
    if m % 2 == 0:
        return {m // 2: 1.0}
    return {m // 2: 0.5, m // 2 + 1: 0.5}


def _sample_balanced(rng: np.random.Generator, m: int) -> np.ndarray:
    counts = _balanced_subset_probs(m)
    if len(counts) == 1:
        count = next(iter(counts))
    else:
        low = min(counts)
        count = low + int(rng.integers(0, 2))
    out = np.zeros(m, dtype=np.float64)
    out[rng.permutation(m)[:count]] = 1.0
    return out


def _sample_balanced_many(rng: np.random.Generator, m: int, size: int) -> np.ndarray:
    # rank uniforms per row; the `count` smallest become treated
    counts = _balanced_subset_probs(m)
    if len(counts) == 1:
        count = np.full(size, next(iter(counts)))
    else:
        count = min(counts) + rng.integers(0, 2, size)
    ranks = np.argsort(np.argsort(rng.random((size, m)), axis=1), axis=1)
    return (ranks < count[:, None]).astype(np.float64)


def _balanced_covariance(m: int) -> np.ndarray:
    # off-diagonals from two-point enumeration: -1/(4(m-1)) even, -1/(4m) odd
    cov = np.full((m, m), -1.0 / (4.0 * (m - 1)) if m % 2 == 0 else -1.0 / (4.0 * m))
    if m == 1:
        cov = np.zeros((1, 1))
    np.fill_diagonal(cov, 0.25)
    return cov


def _balanced_pattern_prob(pattern_sum: np.ndarray, m: int) -> np.ndarray:
    counts = _balanced_subset_probs(m)
    probs = np.zeros(pattern_sum.shape)
    for count, weight in counts.items():
        probs[pattern_sum == count] = weight / comb(m, count)
    return probs


class Design:
    """Base class; subclasses fix `kind`, sampling, covariance, enumeration."""

    kind: str
    k: int

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def sample_many(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Vectorized batch of draws, one per row.

        Distributionally identical to repeated `sample` calls but not
        stream-compatible with them; the replication engine uses `sample`
        with per-replication generators so results are order-independent.
        """
        return np.stack([self.sample(rng) for _ in range(size)])

    def covariance(self) -> np.ndarray:
        raise NotImplementedError

    def exact_distribution(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (patterns, probabilities) covering the full support."""
        raise NotImplementedError

    def _stream_material(self) -> bytes:
        return b""

    def stream_key(self) -> int:
        """Stable 32-bit key derived from the design's content, used to
        separate replication random streams; two structurally identical
        designs share their stream."""
        h = hashlib.sha256()
        h.update(self.kind.encode())
        h.update(int(self.k).to_bytes(8, "little"))
        h.update(self._stream_material())
        return int.from_bytes(h.digest()[:4], "little")

    def __repr__(self) -> str:
        return f"{type(self).__name__}(k={self.k})"


class BernoulliDesign(Design):
    """Independent fair coin per cluster."""

    kind = "ber"

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be positive")
        self.k = int(k)

    def sample(self, rng):
        return rng.integers(0, 2, self.k).astype(np.float64)

    def sample_many(self, rng, size):
        return rng.integers(0, 2, (size, self.k)).astype(np.float64)

    def covariance(self):
        return 0.25 * np.eye(self.k)

    def exact_distribution(self):
        patterns = enumerate_patterns(self.k)
        return patterns, np.full(patterns.shape[0], 0.5**self.k)


class CompleteDesign(Design):
    """Exactly half the clusters treated (a fair split of the two middle
    counts when K is odd, which restores the 1/2 marginal)."""

    kind = "cr"

    def __init__(self, k: int):
        if k < 1:
            raise ValueError("k must be positive")
        self.k = int(k)

    def sample(self, rng):
        return _sample_balanced(rng, self.k)

    def sample_many(self, rng, size):
        return _sample_balanced_many(rng, self.k, size)

    def covariance(self):
        return _balanced_covariance(self.k)

    def exact_distribution(self):
        patterns = enumerate_patterns(self.k)
        probs = _balanced_pattern_prob(patterns.sum(axis=1).astype(np.int64), self.k)
        keep = probs > 0
        return patterns[keep], probs[keep]


class BlockDesign(Design):
    """Independent blocks, each internally completely randomized.

    Blocks of size one fall back to a fair coin; odd blocks use the fair
    mixture of the two middle treated counts.
    """

    kind = "ibr"

    def __init__(self, k: int, blocks: Sequence[Sequence[int]]):
        members = sorted(i for b in blocks for i in b)
        if members != list(range(k)):
            raise ValueError("blocks must partition 0..K-1")
        self.k = int(k)
        self.blocks = tuple(tuple(int(i) for i in b) for b in blocks)

    def sample(self, rng):
        t = np.empty(self.k, dtype=np.float64)
        for block in self.blocks:
            t[list(block)] = _sample_balanced(rng, len(block))
        return t

    def sample_many(self, rng, size):
        t = np.empty((size, self.k), dtype=np.float64)
        for block in self.blocks:
            t[:, list(block)] = _sample_balanced_many(rng, len(block), size)
        return t

    def _stream_material(self):
        return repr(self.blocks).encode()

    def covariance(self):
        cov = np.zeros((self.k, self.k))
        for block in self.blocks:
            idx = np.asarray(block)
            cov[np.ix_(idx, idx)] = _balanced_covariance(len(block))
        return cov

    def exact_distribution(self):
        patterns = enumerate_patterns(self.k)
        probs = np.ones(patterns.shape[0])
        for block in self.blocks:
            idx = np.asarray(block)
            block_sum = patterns[:, idx].sum(axis=1).astype(np.int64)
            probs *= _balanced_pattern_prob(block_sum, len(block))
        keep = probs > 0
        return patterns[keep], probs[keep]


class SignGaussianDesign(Design):
    """Thresholded-Gaussian design: t = 1{R eta >= 0}, eta ~ N(0, I).

    Rows of the root matrix must have unit 2-norm, which pins every
    marginal at 1/2 and yields the treatment covariance
    arcsin(R R^T) / (2 pi) elementwise.  Ties at zero count as treated
    (a measure-zero convention kept for bit reproducibility).
    """

    kind = "ocd"

    def __init__(self, root: np.ndarray):
        root = np.asarray(root, dtype=np.float64)
        if root.ndim != 2 or root.shape[0] != root.shape[1]:
            raise ValueError("root must be a square matrix")
        norms = np.linalg.norm(root, axis=1)
        if np.max(np.abs(norms - 1.0)) > 1e-6:
            raise ValueError("root rows must have unit 2-norm")
        self.root = root
        self.k = root.shape[0]

    def gram(self) -> np.ndarray:
        a = np.clip(self.root @ self.root.T, -1.0, 1.0)
        np.fill_diagonal(a, 1.0)
        return a

    def sample(self, rng):
        return (self.root @ rng.standard_normal(self.k) >= 0.0).astype(np.float64)

    def sample_many(self, rng, size):
        return (rng.standard_normal((size, self.k)) @ self.root.T >= 0.0).astype(np.float64)

    def _stream_material(self):
        return self.root.tobytes()

    def covariance(self):
        cov = np.arcsin(self.gram()) / (2.0 * np.pi)
        np.fill_diagonal(cov, 0.25)
        return cov

    def exact_distribution(self):
        """Exact pattern probabilities via per-component sign moments.

        The Gram matrix is split into connected components over its exact
        off-diagonal zeros; components are independent, and each component
        of dimension <= 5 has closed-form / quadrature-exact sign-pattern
        probabilities.  Larger coupled components have no exact finite
        expression, so enumeration is refused.
        """
        a = self.gram()
        coupling = sp.csr_matrix((np.abs(a) > 0.0) & ~np.eye(self.k, dtype=bool))
        n_comp, comp = connected_components(coupling, directed=False)
        sizes = np.bincount(comp)
        if sizes.max() > MAX_EXACT_SIGN_DIM:
            raise DesignEnumerationError(
                f"coupled component of size {sizes.max()} exceeds the exact "
                f"enumeration limit ({MAX_EXACT_SIGN_DIM}) for this design"
            )
        patterns = enumerate_patterns(self.k)
        probs = np.ones(patterns.shape[0])
        weights = 1 << np.arange(MAX_EXACT_SIGN_DIM)
        for c in range(n_comp):
            idx = np.flatnonzero(comp == c)
            comp_probs = sign_pattern_probabilities(a[np.ix_(idx, idx)])
            codes = (patterns[:, idx].astype(np.int64) * weights[: idx.size]).sum(axis=1)
            probs *= comp_probs[codes]
        return patterns, probs


def build_ibr_blocks(summary: ClusterSummary, block_size: int) -> tuple[tuple[int, ...], ...]:
    """Group clusters into blocks of `block_size` by descending size.

    Clusters are sorted by size (ties broken by cluster id) and chunked;
    a remainder shorter than `block_size` forms one final smaller block.
    `block_size` 2 gives the pair-matched variant.
    """
    if block_size < 2 or block_size % 2 != 0:
        raise ValueError("block_size must be even and at least 2")
    order = sorted(range(summary.k), key=lambda c: (-int(summary.sizes[c]), c))
    return tuple(
        tuple(order[i : i + block_size]) for i in range(0, summary.k, block_size)
    )


def make_design(kind: str, k: int, summary: ClusterSummary | None = None,
                block_size: int = 2, root: np.ndarray | None = None) -> Design:
    """Factory used by the config layer; accepts the kind aliases."""
    canonical = _ALIASES.get(str(kind).lower())
    if canonical is None:
        raise ValueError(
            f"unknown design kind {kind!r}; valid kinds: {', '.join(DESIGN_KINDS)}"
        )
    if canonical == "ber":
        return BernoulliDesign(k)
    if canonical == "cr":
        return CompleteDesign(k)
    if canonical == "ibr":
        if summary is None:
            raise ValueError("ibr design needs a cluster summary for size-sorted blocks")
        return BlockDesign(k, build_ibr_blocks(summary, block_size))
    if root is None:
        raise ValueError("ocd design needs an optimized root matrix")
    root = np.asarray(root, dtype=np.float64)
    if root.shape != (k, k):
        raise ValueError(f"root matrix is {root.shape}, expected ({k}, {k})")
    return SignGaussianDesign(root)
