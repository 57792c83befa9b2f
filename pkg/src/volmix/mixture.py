"""Gaussian mixture configurations, their likelihood, prior and birth/death moves.

Component scale is stored as a precision ``s = 1 / variance``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .kernels import (
    LOG_2PI,
    RngStream,
    dirichlet_logpdf,
    gamma_logpdf,
    logsumexp_rows,
    normal_logpdf,
    sample_gamma,
    truncated_poisson_logpmf,
)


class MixtureError(ValueError):
    pass


@dataclass(frozen=True)
class MixtureState:
    weights: np.ndarray
    means: np.ndarray
    precisions: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=float, ndmin=1)
        mu = np.array(self.means, dtype=float, ndmin=1)
        s = np.array(self.precisions, dtype=float, ndmin=1)
        if not (w.shape == mu.shape == s.shape) or w.ndim != 1 or w.size == 0:
            raise MixtureError("weights, means and precisions must be equal-length, non-empty 1-d arrays")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(mu)) and np.all(np.isfinite(s))):
            raise MixtureError("mixture parameters must be finite")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise MixtureError(f"weights must be non-negative and sum to 1, got {w}")
        if np.any(s <= 0):
            raise MixtureError(f"precisions must be positive, got {s}")
        for arr in (w, mu, s):
            arr.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "precisions", s)

    @property
    def k(self) -> int:
        return self.weights.size

    @property
    def variances(self) -> np.ndarray:
        return 1.0 / self.precisions

    @classmethod
    def standard_normal(cls) -> "MixtureState":
        return cls([1.0], [0.0], [1.0])

    def permuted(self, order) -> "MixtureState":
        order = np.asarray(order)
        return MixtureState(self.weights[order], self.means[order], self.precisions[order])

    def with_params(self, weights=None, means=None, precisions=None) -> "MixtureState":
        return MixtureState(
            self.weights if weights is None else _renormalize(np.asarray(weights, dtype=float)),
            self.means if means is None else means,
            self.precisions if precisions is None else precisions,
        )


def _renormalize(w: np.ndarray) -> np.ndarray:
    return w / w.sum()


@dataclass
class MixturePriors:
    """Hyperparameters of the hierarchical mixture prior.

    ``beta`` is sampled state rather than a constant; it is updated in place
    by the Gibbs sweep via :func:`dataclasses.replace`.
    """

    zeta: float
    R: float
    tau: float
    lam: float = 1.0
    kmax: int = 10
    gamma: float = 1.0
    alpha: float = 2.0
    l: float = 0.2
    m: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        for name in ("lam", "gamma", "tau", "alpha", "l", "m", "R", "beta"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise MixtureError(f"{name} must be positive, got {v}")
        if self.kmax < 1:
            raise MixtureError(f"kmax must be >= 1, got {self.kmax}")
        if not math.isfinite(self.zeta):
            raise MixtureError("zeta must be finite")

    @property
    def precision_shape(self) -> float:
        return 2.0 * self.alpha

    @property
    def precision_rate(self) -> float:
        return 2.0 * self.beta

    def with_beta(self, beta: float) -> "MixturePriors":
        return replace(self, beta=float(beta))


def default_priors_from_data(data, lam: float = 1.0, kmax: int = 10, rng: RngStream | None = None,
                             alpha: float = 2.0, l: float = 0.2, gamma: float = 1.0) -> MixturePriors:
    """Data-driven constants: midpoint, range, tau = 1/R^2, m = 100 l / (alpha R^2).

    ``beta`` is drawn from its Gamma(2l, scale 1/(2m)) prior when ``rng`` is
    given, else set to the prior mean l/m.
    """
    y = np.asarray(data, dtype=float)
    if y.size < 2 or not np.all(np.isfinite(y)):
        raise MixtureError("need at least two finite observations")
    lo, hi = float(y.min()), float(y.max())
    R = hi - lo
    if R <= 0:
        raise MixtureError("data are constant; range R = 0")
    m = 100.0 * l / (alpha * R * R)
    beta = l / m if rng is None else float(sample_gamma(2.0 * l, 1.0 / (2.0 * m), rng))
    # a gamma draw with shape 0.4 can underflow to 0
    beta = max(beta, np.finfo(float).tiny)
    return MixturePriors(zeta=0.5 * (lo + hi), R=R, tau=1.0 / (R * R), lam=lam, kmax=kmax,
                         gamma=gamma, alpha=alpha, l=l, m=m, beta=beta)


def component_log_densities(state: MixtureState, data) -> np.ndarray:
    """(n, k) matrix of log(pi_i) + log N(y_j; mu_i, 1/s_i)."""
    y = np.asarray(data, dtype=float)[:, None]
    s = state.precisions[None, :]
    with np.errstate(divide="ignore"):
        logw = np.log(state.weights)[None, :]
    return logw + 0.5 * (np.log(s) - LOG_2PI) - 0.5 * s * (y - state.means[None, :]) ** 2


def log_likelihood(state: MixtureState, data) -> float:
    y = np.asarray(data, dtype=float)
    if y.size == 0:
        raise MixtureError("log_likelihood needs at least one observation")
    return float(logsumexp_rows(component_log_densities(state, y)).sum())


def log_density(state: MixtureState, x) -> np.ndarray:
    """Pointwise mixture log density."""
    return logsumexp_rows(component_log_densities(state, np.atleast_1d(x)))


def log_component_prior(state: MixtureState, priors: MixturePriors) -> np.ndarray:
    """Per-component log p~(mu_i, s_i): normal on the mean, gamma on the precision."""
    return (normal_logpdf(state.means, priors.zeta, 1.0 / priors.tau)
            + gamma_logpdf(state.precisions, priors.precision_shape, 1.0 / priors.precision_rate))


def log_point_process_prior(state: MixtureState, priors: MixturePriors) -> float:
    """log r(k, pi, mu, s) = log p(k) + sum_i log p~(mu_i, s_i); no weight density."""
    lpk = truncated_poisson_logpmf(state.k, priors.lam, priors.kmax)
    if lpk == -math.inf:
        return -math.inf
    return lpk + float(log_component_prior(state, priors).sum())


def log_prior(state: MixtureState, priors: MixturePriors) -> float:
    lpk = truncated_poisson_logpmf(state.k, priors.lam, priors.kmax)
    if lpk == -math.inf:
        return -math.inf
    ldir = dirichlet_logpdf(state.weights, np.full(state.k, priors.gamma))
    return lpk + ldir + float(log_component_prior(state, priors).sum())


def birth(state: MixtureState, point, kmax: int | None = None) -> MixtureState:
    """Add component ``point = (pi, mu, s)``; existing weights shrink by (1 - pi)."""
    pi, mu, s = (float(v) for v in point)
    if not 0.0 < pi < 1.0:
        raise MixtureError(f"birth weight must lie in (0, 1), got {pi}")
    if kmax is not None and state.k >= kmax:
        raise MixtureError(f"cannot add a component at k = kmax = {kmax}")
    w = np.append(state.weights * (1.0 - pi), pi)
    return MixtureState(_renormalize(w), np.append(state.means, mu), np.append(state.precisions, s))


def death(state: MixtureState, index: int) -> MixtureState:
    """Remove component ``index``; remaining weights are divided by (1 - pi_index)."""
    if state.k < 2:
        raise MixtureError("cannot remove the only component")
    if not 0 <= index < state.k:
        raise MixtureError(f"component index {index} out of range for k = {state.k}")
    keep = np.arange(state.k) != index
    w = state.weights[keep] / (1.0 - state.weights[index])
    return MixtureState(_renormalize(w), state.means[keep], state.precisions[keep])


def initial_state(data, k: int, rng: RngStream | None = None) -> MixtureState:
    """Equal weights, means at evenly spaced data quantiles, common precision 1/var(data)."""
    y = np.asarray(data, dtype=float)
    means = np.quantile(y, (np.arange(k) + 0.5) / k)
    if rng is not None:
        means = means + rng.generator.normal(0.0, 0.01 * y.std(), size=k)
    prec = np.full(k, 1.0 / max(float(y.var()), 1e-12) * k * k)
    return MixtureState(np.full(k, 1.0 / k), means, prec)
