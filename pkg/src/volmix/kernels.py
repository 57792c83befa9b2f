"""Seedable random variates and log densities used by the samplers."""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from scipy.special import gammaln

LOG_2PI = math.log(2.0 * math.pi)


class ParameterDomainError(ValueError):
    """Raised when a distribution parameter lies outside its domain."""


class RngStream:
    """One independent PCG64 stream per (seed, stream_id).

    Streams are derived with ``SeedSequence(seed, spawn_key=(stream_id,))`` so
    chain ``i`` of a run never depends on how many other chains exist.
    """

    def __init__(self, seed: int, stream_id: int = 0):
        if seed < 0 or seed >= 2**64:
            raise ParameterDomainError(f"seed must be a 64-bit unsigned integer, got {seed}")
        if stream_id < 0:
            raise ParameterDomainError(f"stream_id must be non-negative, got {stream_id}")
        self.seed = int(seed)
        self.stream_id = int(stream_id)
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        self.generator = np.random.Generator(np.random.PCG64(ss))

    def __repr__(self) -> str:
        return f"RngStream(seed={self.seed}, stream_id={self.stream_id})"

    def get_state(self) -> dict:
        return self.generator.bit_generator.state

    def set_state(self, state: dict) -> None:
        self.generator.bit_generator.state = state


def _positive(name: str, value: float) -> None:
    if not (value > 0 and math.isfinite(value)):
        raise ParameterDomainError(f"{name} must be positive and finite, got {value}")


# --- samplers -------------------------------------------------------------

def sample_gamma(shape: float, scale: float, rng: RngStream, size=None):
    _positive("shape", shape)
    _positive("scale", scale)
    return rng.generator.gamma(shape, scale, size=size)


def sample_dirichlet(concentrations: Sequence[float], rng: RngStream) -> np.ndarray:
    alpha = np.asarray(concentrations, dtype=float)
    if alpha.ndim != 1 or alpha.size == 0:
        raise ParameterDomainError("concentrations must be a non-empty 1-d sequence")
    if not np.all((alpha > 0) & np.isfinite(alpha)):
        raise ParameterDomainError(f"concentrations must be positive, got {alpha}")
    if alpha.size == 1:
        return np.ones(1)
    # gamma normalisation; tiny concentrations can underflow every gamma to 0
    g = rng.generator.gamma(alpha)
    total = g.sum()
    if total <= 0.0:
        w = np.zeros_like(alpha)
        w[rng.generator.choice(alpha.size, p=alpha / alpha.sum())] = 1.0
        return w
    w = g / total
    return w / w.sum()


def sample_beta(a: float, b: float, rng: RngStream, size=None):
    _positive("a", a)
    _positive("b", b)
    return rng.generator.beta(a, b, size=size)


def sample_normal(mean: float, variance: float, rng: RngStream, size=None):
    _positive("variance", variance)
    return rng.generator.normal(mean, math.sqrt(variance), size=size)


def sample_inverse_gamma(shape: float, scale: float, rng: RngStream, size=None):
    """Draw X with 1/X ~ Gamma(shape, rate=scale); mean scale/(shape-1)."""
    _positive("shape", shape)
    _positive("scale", scale)
    return 1.0 / rng.generator.gamma(shape, 1.0 / scale, size=size)


def sample_exponential(mean: float, rng: RngStream, size=None):
    _positive("mean", mean)
    return rng.generator.exponential(mean, size=size)


def sample_categorical(probs: Sequence[float], rng: RngStream) -> int:
    p = np.asarray(probs, dtype=float)
    if p.ndim != 1 or p.size == 0 or np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ParameterDomainError(f"invalid categorical probabilities {p}")
    if abs(p.sum() - 1.0) > 1e-9:
        raise ParameterDomainError(f"categorical probabilities sum to {p.sum()}, not 1")
    return categorical_index(np.cumsum(p), rng.generator.random())


def categorical_index(cumulative: np.ndarray, u: float) -> int:
    """Index of the first cumulative entry exceeding ``u * total``."""
    total = cumulative[-1]
    idx = min(int(np.searchsorted(cumulative, u * total, side="right")), cumulative.size - 1)
    # u * total can round up to total; step back off trailing zero-mass entries
    while idx > 0 and cumulative[idx] == cumulative[idx - 1]:
        idx -= 1
    return idx


# --- log densities --------------------------------------------------------

def logsumexp_rows(a: np.ndarray) -> np.ndarray:
    """log(sum(exp(a), axis=-1)) without scipy's dispatch overhead (hot loops)."""
    if a.shape[-1] == 1:
        return a[..., 0].copy()
    m = a.max(axis=-1, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.log(np.exp(a - m).sum(axis=-1)) + m[..., 0]


def truncated_poisson_pmf(k: int, lam: float, kmax: int) -> float:
    """p(k) proportional to lam**k / k! on {1, ..., kmax}; zero elsewhere."""
    _positive("lambda", lam)
    if kmax < 1:
        raise ParameterDomainError(f"kmax must be >= 1, got {kmax}")
    if k < 1 or k > kmax:
        return 0.0
    return math.exp(truncated_poisson_logpmf(k, lam, kmax))


def truncated_poisson_logpmf(k: int, lam: float, kmax: int) -> float:
    if k < 1 or k > kmax:
        return -math.inf
    support = np.arange(1, kmax + 1)
    logw = support * math.log(lam) - gammaln(support + 1)
    lognorm = float(np.logaddexp.reduce(logw))
    return float(logw[k - 1]) - lognorm


def normal_logpdf(x, mean, variance):
    x = np.asarray(x, dtype=float)
    return -0.5 * (LOG_2PI + np.log(variance) + (x - mean) ** 2 / variance)


def gamma_logpdf(x, shape: float, scale: float):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = (shape - 1.0) * np.log(x) - x / scale - gammaln(shape) - shape * math.log(scale)
    return np.where(x > 0, out, -np.inf)


def inverse_gamma_logpdf(x, shape: float, scale: float):
    x = np.asarray(x, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = shape * math.log(scale) - gammaln(shape) - (shape + 1.0) * np.log(x) - scale / x
    return np.where(x > 0, out, -np.inf)


def beta_logpdf(x, a: float, b: float):
    x = np.asarray(x, dtype=float)
    inside = (x > 0) & (x < 1)
    xs = np.where(inside, x, 0.5)
    out = (a - 1.0) * np.log(xs) + (b - 1.0) * np.log1p(-xs) - (gammaln(a) + gammaln(b) - gammaln(a + b))
    return np.where(inside, out, -np.inf)


def exponential_logpdf(x, mean: float):
    x = np.asarray(x, dtype=float)
    return np.where(x >= 0, -math.log(mean) - x / mean, -np.inf)


def dirichlet_logpdf(weights, concentrations) -> float:
    """Density on the (k-1)-simplex w.r.t. Lebesgue measure on the first k-1 coordinates."""
    w = np.asarray(weights, dtype=float)
    a = np.asarray(concentrations, dtype=float)
    if w.size == 1:
        return 0.0
    if np.any((w <= 0) & (a != 1.0)):
        return -math.inf
    terms = np.where(a == 1.0, 0.0, (a - 1.0) * np.log(np.where(w > 0, w, 1.0)))
    return float(gammaln(a.sum()) - gammaln(a).sum() + terms.sum())
