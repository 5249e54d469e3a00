"""Closed-form bias/variance, the variance bound, and the design objective.

All cluster-level quantities run through the contact matrix C (ordered
cross-endpoint counts), the cluster degree vector d = C 1, and the
treatment covariance matrix.  The enumeration-based variance oracle lives
here as well so the closed forms can be checked against an independent
computation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .clustering import ClusterSummary, Clustering
from .designs import Design
from .graph import Graph
from .outcomes import AnalysisModelParams

__all__ = [
    "h_vector",
    "bias_closed_form",
    "omega_from_model",
    "variance_bound",
    "objective_terms",
    "objective_f",
    "ExactVariance",
    "variance_exact",
    "is_valid_covariance",
]


def _check_cov_shape(summary: ClusterSummary, cov: np.ndarray) -> np.ndarray:
    cov = np.asarray(cov, dtype=np.float64)
    if cov.shape != (summary.k, summary.k):
        raise ValueError(f"covariance is {cov.shape}, expected ({summary.k}, {summary.k})")
    return cov


def is_valid_covariance(cov: np.ndarray, atol: float = 1e-9) -> bool:
    """Check the balanced-design covariance constraints (symmetry, PSD,
    diagonal 1/4, off-diagonals within [-1/4, 1/4])."""
    cov = np.asarray(cov, dtype=np.float64)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1]:
        return False
    if not np.allclose(cov, cov.T, atol=atol):
        return False
    if np.max(np.abs(np.diag(cov) - 0.25)) > atol:
        return False
    if np.max(np.abs(cov)) > 0.25 + atol:
        return False
    eigmin = float(np.linalg.eigvalsh((cov + cov.T) / 2.0).min())
    return eigmin > -atol


def h_vector(params: AnalysisModelParams, graph: Graph, clustering: Clustering) -> np.ndarray:
    """Per-cluster sums of (beta_i - gamma * d_i), the linear coefficient of
    the centered estimator in the cluster treatment vector."""
    per_unit = params.beta - params.gamma * graph.degrees.astype(np.float64)
    h = np.zeros(clustering.k)
    np.add.at(h, clustering.assignment, per_unit)
    return h


def bias_closed_form(summary: ClusterSummary, cov: np.ndarray, gamma: float) -> float:
    """(gamma/n) * (4 trace(C Cov) - sum(C)): the exact estimator bias under
    the analysis model, which depends on the design only through Cov."""
    cov = _check_cov_shape(summary, cov)
    return gamma / summary.n * (4.0 * np.trace(summary.contact @ cov) - summary.total)


def omega_from_model(summary: ClusterSummary, h: np.ndarray, gamma: float) -> float:
    """Smallest omega with |h_k| <= omega * gamma * d_k for all clusters.

    Infinite when some cluster has zero degree mass but a nonzero h_k,
    in which case no comparability constant exists.
    """
    if gamma == 0.0:
        raise ValueError("omega is undefined for gamma = 0")
    h = np.asarray(h, dtype=np.float64)
    d = summary.cluster_degrees
    ratios = np.zeros_like(h)
    positive = d > 0
    ratios[positive] = np.abs(h[positive]) / (abs(gamma) * d[positive])
    if np.any(~positive & (h != 0.0)):
        return float("inf")
    return float(ratios.max()) if ratios.size else 0.0


def variance_bound(summary: ClusterSummary, cov: np.ndarray, gamma: float,
                   omega: float) -> float:
    """Upper bound on the estimator variance:
    (8 gamma^2 (omega^2+4) / n^2) * d' (Cov + (1/4) 11') d."""
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    cov = _check_cov_shape(summary, cov)
    d = summary.cluster_degrees
    quad = d @ cov @ d + 0.25 * d.sum() ** 2
    return 8.0 * gamma**2 * (omega**2 + 4.0) / summary.n**2 * quad


def objective_terms(summary: ClusterSummary, cov: np.ndarray,
                    omega: float) -> tuple[float, float]:
    """Scale-free squared-bias and variance-bound terms of the design objective.

    The common gamma^2/n^2 multiplier of the mean-squared-error bound is
    dropped: it involves only the unknown interference strength and does
    not move the minimizer.
    """
    if omega < 0:
        raise ValueError("omega must be nonnegative")
    cov = _check_cov_shape(summary, cov)
    d = summary.cluster_degrees
    bias_term = (4.0 * np.trace(summary.contact @ cov) - summary.total) ** 2
    variance_term = 8.0 * (omega**2 + 4.0) * (d @ cov @ d + 0.25 * d.sum() ** 2)
    return float(bias_term), float(variance_term)


def objective_f(summary: ClusterSummary, cov: np.ndarray, omega: float) -> float:
    bias_term, variance_term = objective_terms(summary, cov, omega)
    return bias_term + variance_term


@dataclass(frozen=True)
class ExactVariance:
    """Enumerated variance of the adjusted estimator plus its decomposition.

    `linear_term`, `cross_term` and `quad_term` are Var[h't],
    Cov[h't, t'Ct] and Var[t'Ct] of the enumerated distribution; the
    decomposition identity states
    variance == (4/n^2) (linear + 4 gamma cross + 4 gamma^2 quad).
    """

    variance: float
    linear_term: float
    cross_term: float
    quad_term: float
    gamma: float
    n: int

    @property
    def three_term_sum(self) -> float:
        return (4.0 / self.n**2) * (
            self.linear_term
            + 4.0 * self.gamma * self.cross_term
            + 4.0 * self.gamma**2 * self.quad_term
        )


def variance_exact(summary: ClusterSummary, h: np.ndarray, gamma: float,
                   design: Design, k_max: int = 16) -> ExactVariance:
    """Variance of (2/n)(h't + 2 gamma t'Ct) by full enumeration.

    Sums over the design's exact outcome distribution, so it is an oracle
    independent of any closed-form variance expression.  Designs that
    cannot enumerate raise DesignEnumerationError.
    """
    if design.k != summary.k:
        raise ValueError(f"design has K={design.k}, summary has K={summary.k}")
    if design.k > k_max:
        raise ValueError(f"K={design.k} exceeds enumeration cap {k_max}")
    h = np.asarray(h, dtype=np.float64)
    patterns, probs = design.exact_distribution()
    u = patterns @ h
    q = np.einsum("mi,ij,mj->m", patterns, summary.contact, patterns)
    estimates = (2.0 / summary.n) * (u + 2.0 * gamma * q)
    mean_u = probs @ u
    mean_q = probs @ q
    mean_est = probs @ estimates
    return ExactVariance(
        variance=float(probs @ (estimates - mean_est) ** 2),
        linear_term=float(probs @ (u - mean_u) ** 2),
        cross_term=float(probs @ ((u - mean_u) * (q - mean_q))),
        quad_term=float(probs @ (q - mean_q) ** 2),
        gamma=float(gamma),
        n=summary.n,
    )
