"""Accuracy and mixing diagnostics for sampled precision matrices."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .errors import BadBatchCount, ConstantSeries, DimensionMismatch, ZeroReference

DEFAULT_BATCHES = 20
DEFAULT_MAX_LAG = 40


def nmse(K: np.ndarray, K_ref: np.ndarray) -> float:
    """Squared Frobenius error relative to ``K_ref`` (all ``p^2`` cells)."""
    K = np.asarray(K, dtype=float)
    K_ref = np.asarray(K_ref, dtype=float)
    if K.shape != K_ref.shape:
        raise DimensionMismatch(f"shapes {K.shape} and {K_ref.shape} differ")
    denom = float(np.sum(K_ref**2))
    if denom == 0.0:
        raise ZeroReference("reference matrix is zero")
    return float(np.sum((K - K_ref) ** 2)) / denom


def _centered(series) -> tuple[np.ndarray, float]:
    y = np.asarray(series, dtype=float).ravel()
    if y.size == 0:
        raise ValueError("empty series")
    y = y - y.mean()
    denom = float(y @ y)
    if denom == 0.0:
        raise ConstantSeries("series has zero variance")
    return y, denom


def autocorrelation(series, h: int) -> float:
    """Lag-``h`` autocorrelation using the mean of the whole series.

    ``R_h = sum_{i} (y_i - ybar)(y_{i+h} - ybar) / sum_i (y_i - ybar)^2``
    """
    y, denom = _centered(series)
    if not 0 <= h < y.size:
        raise ValueError(f"lag {h} outside 0..{y.size - 1}")
    return float(y[: y.size - h] @ y[h:]) / denom


def acf(series, max_lag: int = DEFAULT_MAX_LAG) -> np.ndarray:
    """``R_0 .. R_max_lag`` (truncated to the series length)."""
    y, denom = _centered(series)
    lags = range(min(max_lag, y.size - 1) + 1)
    return np.array([float(y[: y.size - h] @ y[h:]) / denom for h in lags])


def batch_standard_error(series, n_batches: int = DEFAULT_BATCHES) -> float:
    """Standard deviation of equal batch means over ``sqrt(n_batches)``."""
    y = np.asarray(series, dtype=float).ravel()
    if n_batches < 2:
        raise BadBatchCount("need at least two batches")
    if y.size % n_batches != 0 or y.size // n_batches < 2:
        raise BadBatchCount(f"{y.size} values do not split into {n_batches} batches of size >= 2")
    means = y.reshape(n_batches, -1).mean(axis=1)
    return float(means.std(ddof=1) / np.sqrt(n_batches))


def write_series_csv(path: str | Path, columns: dict[str, np.ndarray]) -> None:
    """Write equal-length series as CSV columns with a header row."""
    names = list(columns)
    data = [np.asarray(columns[n]).ravel() for n in names]
    if len({d.size for d in data}) > 1:
        raise ValueError("series lengths differ")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row in zip(*data):
            w.writerow([repr(float(v)) for v in row])
