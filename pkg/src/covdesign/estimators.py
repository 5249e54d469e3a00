"""Effect estimators for balanced (probability-1/2) treatment assignments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["EstimateRecord", "ht", "ht_adjusted", "dim", "ESTIMATOR_KINDS"]

ESTIMATOR_KINDS = ("ht", "ht_adjusted", "dim")


@dataclass(frozen=True)
class EstimateRecord:
    value: float
    kind: str
    degenerate: bool = False


def ht(z: np.ndarray, y: np.ndarray) -> EstimateRecord:
    """Inverse-probability estimator for marginal treatment probability 1/2.

    With both group propensities equal to 1/2 the weights collapse to
    (2/n) * sum((2 z_i - 1) * y_i).
    """
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    value = 2.0 * np.mean((2.0 * z - 1.0) * y)
    return EstimateRecord(float(value), "ht")


def ht_adjusted(z: np.ndarray, y: np.ndarray, alpha: np.ndarray) -> EstimateRecord:
    """Base-level-adjusted variant: the plain estimator applied to y - alpha."""
    rec = ht(z, np.asarray(y, dtype=np.float64) - np.asarray(alpha, dtype=np.float64))
    return EstimateRecord(rec.value, "ht_adjusted")


def dim(z: np.ndarray, y: np.ndarray) -> EstimateRecord:
    """Difference in group means; degenerate when either group is empty."""
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    treated = z == 1.0
    n_treated = int(treated.sum())
    if n_treated == 0 or n_treated == z.size:
        return EstimateRecord(float("nan"), "dim", degenerate=True)
    value = y[treated].mean() - y[~treated].mean()
    return EstimateRecord(float(value), "dim")
