"""Convergence diagnostics and posterior summaries."""
from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .mixture import MixtureState
from .sv import sv_log_obs_density

QUANTILES = (0.025, 0.25, 0.5, 0.75, 0.975)
SUMMARY_HEADER = ["parameter", "mean", "sd", "q2.5", "q25", "q50", "q75", "q97.5", "rhat"]


class DiagnosticsError(ValueError):
    pass


def _as_chainset(chains) -> np.ndarray:
    arr = np.asarray(chains, dtype=float)
    if arr.ndim != 2:
        raise DiagnosticsError("chains must be a 2-d array-like (m chains x n draws)")
    m, n = arr.shape
    if m < 2 or n < 2:
        raise DiagnosticsError(f"need at least 2 chains of length >= 2, got {m} x {n}")
    if not np.all(np.isfinite(arr)):
        raise DiagnosticsError("chains contain non-finite values")
    return arr


def gelman_rubin(chains, split: bool = False) -> float:
    """Potential scale reduction sqrt(((n-1)/n W + B/n) / W).

    No degrees-of-freedom correction. ``split=True`` halves every chain first.
    """
    arr = np.asarray(chains, dtype=float)
    if split:
        half = arr.shape[1] // 2
        arr = np.concatenate([arr[:, :half], arr[:, arr.shape[1] - half:]], axis=0)
    arr = _as_chainset(arr)
    m, n = arr.shape
    W = arr.var(axis=1, ddof=1).mean()
    if W == 0:
        raise DiagnosticsError("within-chain variance is zero; R-hat undefined")
    B = n * arr.mean(axis=1).var(ddof=1)
    return math.sqrt(((n - 1) / n * W + B / n) / W)


@dataclass
class SummaryRow:
    parameter: str
    mean: float
    sd: float
    quantiles: tuple
    rhat: float

    def as_list(self) -> list:
        return [self.parameter, self.mean, self.sd, *self.quantiles, self.rhat]


def summarize(values, rhat: float = float("nan"), parameter: str = "") -> SummaryRow:
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise DiagnosticsError("cannot summarise an empty chain")
    if not np.all(np.isfinite(x)):
        raise DiagnosticsError("values must be finite")
    if np.ptp(x) == 0:
        # exact for constant chains, where summation rounding would leave sd ~ 1e-16
        return SummaryRow(parameter, float(x[0]), 0.0, (float(x[0]),) * len(QUANTILES), rhat)
    sd = float(x.std(ddof=1))
    # numpy's default "linear" rule: h = (n - 1) p on the sorted sample
    q = np.quantile(x, QUANTILES)
    return SummaryRow(parameter, float(x.mean()), sd, tuple(float(v) for v in q), rhat)


def deviance(mix: MixtureState, h, y) -> float:
    h = np.asarray(h, dtype=float)
    y = np.asarray(y, dtype=float)
    if h.shape != y.shape:
        raise DiagnosticsError(f"h and y must be aligned, got {h.shape} and {y.shape}")
    return float(-2.0 * np.sum(sv_log_obs_density(y, h, mix)))


def k_posterior(k_values: Sequence[int]) -> list[tuple[int, int, float]]:
    counts = Counter(int(k) for k in k_values)
    total = sum(counts.values())
    return [(k, counts[k], counts[k] / total) for k in sorted(counts)]


def modal_k(k_values: Sequence[int]) -> int:
    """Most frequent k; ties go to the smaller k."""
    counts = Counter(int(k) for k in k_values)
    if not counts:
        raise DiagnosticsError("no k values")
    best = max(counts.values())
    return min(k for k, c in counts.items() if c == best)
