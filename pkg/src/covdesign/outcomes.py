"""Potential-outcome models and their oracle average treatment effects."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .graph import Graph

__all__ = [
    "AnalysisModelParams",
    "SimModelParams",
    "eval_analysis",
    "eval_sim",
    "gate_analysis",
    "gate_sim",
    "with_gamma",
]


@dataclass(frozen=True)
class AnalysisModelParams:
    """Linear-in-neighborhood model: Y_i = alpha_i + beta_i z_i + gamma * sum_{j~i} z_j.

    Base levels and direct effects may vary per unit; the interference
    coefficient is a single scalar.
    """

    alpha: np.ndarray
    beta: np.ndarray
    gamma: float

    @classmethod
    def uniform(cls, n: int, alpha: float = 0.0, beta: float = 1.0, gamma: float = 1.0):
        return cls(np.full(n, float(alpha)), np.full(n, float(beta)), float(gamma))


@dataclass(frozen=True)
class SimModelParams:
    """Scalar-parameter simulation models with degree-normalized interference.

    linear:
        Y_i = alpha + beta z_i + c d_i/dbar + sigma eps_i + gamma nbr_i/d_i
    multiplicative:
        Y_i = (alpha + sigma eps_i) (d_i/dbar) (1 + beta z_i + gamma nbr_i/d_i)

    where nbr_i is the treated-neighbor count.  For isolated nodes the
    normalized interference term is defined as 0.
    """

    kind: str
    alpha: float
    beta: float
    c: float
    sigma: float
    gamma: float
    mean_degree: float

    def __post_init__(self):
        if self.kind not in ("linear", "multiplicative"):
            raise ValueError(f"unknown model kind {self.kind!r}")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @classmethod
    def for_graph(
        cls,
        graph: Graph,
        kind: str,
        alpha: float = 1.0,
        beta: float = 1.0,
        c: float = 0.5,
        sigma: float = 0.1,
        gamma: float = 1.0,
    ):
        return cls(kind, float(alpha), float(beta), float(c), float(sigma),
                   float(gamma), graph.mean_degree)


def with_gamma(params, gamma: float):
    """Copy of a model parameter set with the interference coefficient replaced."""
    return replace(params, gamma=float(gamma))


def eval_analysis(params: AnalysisModelParams, graph: Graph, z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    if z.shape != (graph.n,) or params.alpha.shape != (graph.n,):
        raise ValueError("length mismatch between model, graph, and treatment")
    return params.alpha + params.beta * z + params.gamma * graph.neighbor_sums(z)


def gate_analysis(params: AnalysisModelParams, graph: Graph) -> float:
    """Global average treatment effect under the analysis model: mean(beta_i + gamma d_i)."""
    return float(np.mean(params.beta + params.gamma * graph.degrees))


def eval_sim(params: SimModelParams, graph: Graph, z: np.ndarray,
             noise: np.ndarray) -> np.ndarray:
    """Evaluate one of the simulation models for a unit-level treatment.

    `noise` is the externally drawn per-unit standard-normal vector, kept
    explicit so replications are reproducible and noise can be shared
    across designs when requested.
    """
    z = np.asarray(z, dtype=np.float64)
    noise = np.asarray(noise, dtype=np.float64)
    if z.shape != (graph.n,) or noise.shape != (graph.n,):
        raise ValueError("treatment/noise length must equal graph size")
    deg = graph.degrees.astype(np.float64)
    nbr = graph.neighbor_sums(z)
    frac = np.divide(nbr, deg, out=np.zeros_like(nbr), where=deg > 0)
    dbar = params.mean_degree
    rel_degree = deg / dbar if dbar > 0 else np.zeros_like(deg)
    if params.kind == "linear":
        return (params.alpha + params.beta * z + params.c * rel_degree
                + params.sigma * noise + params.gamma * frac)
    return ((params.alpha + params.sigma * noise) * rel_degree
            * (1.0 + params.beta * z + params.gamma * frac))


def gate_sim(params: SimModelParams) -> float:
    """Oracle effect for the simulation models: beta+gamma, or alpha*(beta+gamma)."""
    if params.kind == "linear":
        return params.beta + params.gamma
    return params.alpha * (params.beta + params.gamma)
