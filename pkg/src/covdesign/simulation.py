"""Monte Carlo and exact-enumeration comparison of randomization designs.

Each replication draws its own generator from (base seed, design content
key, gamma index, replication index), so results are independent of
execution order: chunks of replications can run on any number of workers
and land in preallocated arrays by index, making parallel runs
bit-identical to serial ones.
"""

from __future__ import annotations

import concurrent.futures
import multiprocessing
from dataclasses import dataclass, field

import numpy as np

from .clustering import Clustering
from .designs import Design
from .estimators import ESTIMATOR_KINDS
from .graph import Graph
from .outcomes import (
    AnalysisModelParams,
    SimModelParams,
    eval_analysis,
    eval_sim,
    gate_analysis,
    gate_sim,
    with_gamma,
)

__all__ = [
    "SimConfig",
    "ReportCell",
    "SimReport",
    "run_mc",
    "run_exact",
    "compare_designs",
    "baseline_levels",
]

# leading spawn-key tags keeping design streams and the shared noise
# stream in disjoint families
_DESIGN_STREAM = 1
_NOISE_STREAM = 2


def baseline_levels(model, graph: Graph) -> np.ndarray:
    """Known per-unit base level of a model: its deterministic outcome under
    global control with the noise switched off."""
    if isinstance(model, AnalysisModelParams):
        return np.asarray(model.alpha, dtype=np.float64)
    deg = graph.degrees.astype(np.float64)
    rel = deg / model.mean_degree if model.mean_degree > 0 else np.zeros_like(deg)
    if model.kind == "linear":
        return model.alpha + model.c * rel
    return model.alpha * rel


@dataclass(frozen=True)
class SimConfig:
    graph: Graph
    clustering: Clustering
    designs: tuple[tuple[str, Design], ...]
    model: SimModelParams | AnalysisModelParams
    gammas: tuple[float, ...]
    estimators: tuple[str, ...] = ("ht", "dim")
    replications: int = 10_000
    base_seed: int = 0
    shared_noise: bool = False
    workers: int = 1

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be at least 1")
        if not self.gammas:
            raise ValueError("gamma grid must be nonempty")
        if not self.designs:
            raise ValueError("at least one design is required")
        for kind in self.estimators:
            if kind not in ESTIMATOR_KINDS:
                raise ValueError(f"unknown estimator {kind!r}; valid: {ESTIMATOR_KINDS}")
        for name, design in self.designs:
            if design.k != self.clustering.k:
                raise ValueError(
                    f"design {name!r} has K={design.k}, clustering has K={self.clustering.k}"
                )


@dataclass(frozen=True)
class ReportCell:
    design: str
    gamma: float
    estimator: str
    bias: float
    sd: float
    mse: float
    se_bias: float
    se_sd: float
    se_mse: float
    mean_estimate: float
    oracle: float
    replications: int
    valid: int
    degenerate_fraction: float


@dataclass(frozen=True)
class SimReport:
    kind: str
    cells: tuple[ReportCell, ...]
    designs: tuple[str, ...]
    gammas: tuple[float, ...]
    estimators: tuple[str, ...]
    meta: dict = field(default_factory=dict)

    def cell(self, design: str, gamma: float, estimator: str) -> ReportCell:
        for c in self.cells:
            if c.design == design and c.gamma == gamma and c.estimator == estimator:
                return c
        raise KeyError((design, gamma, estimator))

    def minima(self) -> dict[str, str]:
        """Design with the smallest MSE per (estimator, gamma) cell group."""
        best: dict[str, str] = {}
        for estimator in self.estimators:
            for gamma in self.gammas:
                cells = [c for c in self.cells
                         if c.estimator == estimator and c.gamma == gamma]
                winner = min(cells, key=lambda c: (np.isnan(c.mse), c.mse))
                best[f"{estimator}|gamma={gamma:g}"] = winner.design
        return best

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "designs": list(self.designs),
            "gammas": list(self.gammas),
            "estimators": list(self.estimators),
            "cells": [vars(c) for c in self.cells],
            "minima": self.minima(),
            "meta": self.meta,
        }


def _rep_rng(base_seed: int, spawn_key: tuple[int, ...]) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=base_seed, spawn_key=spawn_key)
    return np.random.Generator(np.random.PCG64(seq))


def _estimate_all(kinds, z, y, baseline):
    values = np.empty(len(kinds))
    degenerate = np.zeros(len(kinds), dtype=bool)
    signed = 2.0 * z - 1.0
    for i, kind in enumerate(kinds):
        if kind == "ht":
            values[i] = 2.0 * np.mean(signed * y)
        elif kind == "ht_adjusted":
            values[i] = 2.0 * np.mean(signed * (y - baseline))
        else:  # dim
            treated = z == 1.0
            m = int(treated.sum())
            if m == 0 or m == z.size:
                values[i] = np.nan
                degenerate[i] = True
            else:
                values[i] = y[treated].mean() - y[~treated].mean()
    return values, degenerate


def _mc_chunk(graph: Graph, assignment: np.ndarray, design: Design, model,
              estimators, baseline, base_seed: int, design_key: int,
              gamma_idx: int, rep_range, shared_noise: bool):
    start, stop = rep_range
    n_est = len(estimators)
    values = np.empty((stop - start, n_est))
    degenerate = np.zeros((stop - start, n_est), dtype=bool)
    is_sim = isinstance(model, SimModelParams)
    needs_noise = is_sim and model.sigma > 0.0
    for rep in range(start, stop):
        rng = _rep_rng(base_seed, (_DESIGN_STREAM, design_key, gamma_idx, rep))
        t = design.sample(rng)
        z = t[assignment]
        if is_sim:
            if needs_noise:
                noise_rng = (
                    _rep_rng(base_seed, (_NOISE_STREAM, 0, gamma_idx, rep))
                    if shared_noise else rng
                )
                noise = noise_rng.standard_normal(graph.n)
            else:
                noise = np.zeros(graph.n)
            y = eval_sim(model, graph, z, noise)
        else:
            y = eval_analysis(model, graph, z)
        values[rep - start], degenerate[rep - start] = _estimate_all(
            estimators, z, y, baseline
        )
    return start, values, degenerate


def _aggregate_cell(name, gamma, estimator, values, degenerate, oracle) -> ReportCell:
    reps = values.size
    valid = values[~degenerate]
    m = valid.size
    if m < 2:
        return ReportCell(name, gamma, estimator, float("nan"), float("nan"),
                          float("nan"), float("nan"), float("nan"), float("nan"),
                          float("nan"), oracle, reps, m, 1.0 - m / reps)
    mean = float(valid.mean())
    sd = float(valid.std(ddof=1))
    sq_dev = (valid - oracle) ** 2
    mse = float(sq_dev.mean())
    return ReportCell(
        design=name,
        gamma=gamma,
        estimator=estimator,
        bias=mean - oracle,
        sd=sd,
        mse=mse,
        se_bias=sd / np.sqrt(m),
        se_sd=sd / np.sqrt(2.0 * (m - 1)),
        se_mse=float(sq_dev.std(ddof=1)) / np.sqrt(m),
        mean_estimate=mean,
        oracle=oracle,
        replications=reps,
        valid=m,
        degenerate_fraction=1.0 - m / reps,
    )


def _oracle(model, graph: Graph) -> float:
    if isinstance(model, SimModelParams):
        return gate_sim(model)
    return gate_analysis(model, graph)


def run_mc(config: SimConfig) -> SimReport:
    """Monte Carlo table of bias / SD / MSE for every design, gamma and
    estimator in the configuration.

    Bias is measured against the model's oracle effect.  Noise is redrawn
    per replication and per design unless `shared_noise` asks for a
    design-independent noise stream.  Deterministic for a fixed base seed
    and any worker count.
    """
    graph = config.graph
    assignment = config.clustering.assignment
    reps = config.replications
    workers = max(1, config.workers)
    cells = []

    executor = None
    if workers > 1:
        ctx = multiprocessing.get_context("fork")
        executor = concurrent.futures.ProcessPoolExecutor(workers, mp_context=ctx)
    try:
        for g_idx, gamma in enumerate(config.gammas):
            model = with_gamma(config.model, gamma)
            baseline = baseline_levels(model, graph)
            oracle = _oracle(model, graph)
            for name, design in config.designs:
                values = np.empty((reps, len(config.estimators)))
                degenerate = np.zeros((reps, len(config.estimators)), dtype=bool)
                bounds = np.linspace(0, reps, min(workers, reps) + 1).astype(int)
                ranges = [(int(a), int(b)) for a, b in zip(bounds[:-1], bounds[1:]) if a < b]
                args = [
                    (graph, assignment, design, model, config.estimators, baseline,
                     config.base_seed, design.stream_key(), g_idx, r,
                     config.shared_noise)
                    for r in ranges
                ]
                if executor is None:
                    results = [_mc_chunk(*a) for a in args]
                else:
                    results = list(executor.map(_mc_chunk, *zip(*args)))
                for start, vals, degen in results:
                    values[start : start + vals.shape[0]] = vals
                    degenerate[start : start + vals.shape[0]] = degen
                for e_idx, estimator in enumerate(config.estimators):
                    cells.append(_aggregate_cell(
                        name, gamma, estimator,
                        values[:, e_idx], degenerate[:, e_idx], oracle,
                    ))
    finally:
        if executor is not None:
            executor.shutdown()

    return SimReport(
        kind="monte-carlo",
        cells=tuple(cells),
        designs=tuple(name for name, _ in config.designs),
        gammas=tuple(config.gammas),
        estimators=tuple(config.estimators),
        meta={
            "replications": reps,
            "base_seed": config.base_seed,
            "shared_noise": config.shared_noise,
        },
    )


def run_exact(graph: Graph, clustering: Clustering,
              designs: tuple[tuple[str, Design], ...],
              model: AnalysisModelParams,
              estimators: tuple[str, ...] = ("ht",),
              gammas: tuple[float, ...] | None = None,
              k_max: int = 16) -> SimReport:
    """Exact bias / SD / MSE by summing over each design's full outcome
    distribution (noise-free analysis model only).

    Degenerate difference-in-means outcomes (all clusters treated or all
    control) are excluded from that estimator's aggregates with their
    probability mass reported, mirroring the Monte Carlo handling.
    """
    if isinstance(model, SimModelParams):
        raise ValueError("exact enumeration requires the noise-free analysis model")
    if clustering.k > k_max:
        raise ValueError(f"K={clustering.k} exceeds enumeration cap {k_max}")
    gammas = tuple(gammas) if gammas is not None else (model.gamma,)
    for kind in estimators:
        if kind not in ESTIMATOR_KINDS:
            raise ValueError(f"unknown estimator {kind!r}; valid: {ESTIMATOR_KINDS}")

    assignment = clustering.assignment
    adjacency = graph.adjacency
    n = graph.n
    cells = []
    for gamma in gammas:
        model_g = with_gamma(model, gamma)
        oracle = gate_analysis(model_g, graph)
        baseline = baseline_levels(model_g, graph)
        for name, design in designs:
            if design.k != clustering.k:
                raise ValueError(f"design {name!r} has K={design.k}, "
                                 f"clustering has K={clustering.k}")
            patterns, probs = design.exact_distribution()
            z = patterns[:, assignment]
            nbr = (adjacency @ z.T).T
            y = model_g.alpha[None, :] + model_g.beta[None, :] * z + gamma * nbr
            signed = 2.0 * z - 1.0
            treated_count = z.sum(axis=1)
            for estimator in estimators:
                if estimator == "ht":
                    est = 2.0 * np.mean(signed * y, axis=1)
                    weights = probs
                elif estimator == "ht_adjusted":
                    est = 2.0 * np.mean(signed * (y - baseline[None, :]), axis=1)
                    weights = probs
                else:
                    ok = (treated_count > 0) & (treated_count < n)
                    sums = z * y
                    with np.errstate(invalid="ignore", divide="ignore"):
                        est = (sums.sum(axis=1) / treated_count
                               - (y - sums).sum(axis=1) / (n - treated_count))
                    est, weights = est[ok], probs[ok]
                total = float(weights.sum())
                if total <= 0.0:
                    mean = var = mse = float("nan")
                else:
                    mean = float(weights @ est) / total
                    var = float(weights @ (est - mean) ** 2) / total
                    mse = float(weights @ (est - oracle) ** 2) / total
                cells.append(ReportCell(
                    design=name, gamma=gamma, estimator=estimator,
                    bias=mean - oracle, sd=float(np.sqrt(var)), mse=mse,
                    se_bias=0.0, se_sd=0.0, se_mse=0.0,
                    mean_estimate=mean, oracle=oracle,
                    replications=patterns.shape[0], valid=int(weights.size),
                    degenerate_fraction=float(1.0 - total),
                ))
    return SimReport(
        kind="exact",
        cells=tuple(cells),
        designs=tuple(name for name, _ in designs),
        gammas=gammas,
        estimators=tuple(estimators),
    )


def compare_designs(config: SimConfig) -> SimReport:
    """Monte Carlo comparison table across the configured designs; the
    minimum-MSE design per (estimator, gamma) is available via `minima`."""
    return run_mc(config)
