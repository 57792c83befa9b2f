"""Continuous-time birth-death process over mixture configurations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .kernels import RngStream, categorical_index, logsumexp_rows, truncated_poisson_logpmf
from .mixture import (
    MixturePriors,
    MixtureState,
    birth,
    component_log_densities,
    death,
)


@dataclass(frozen=True)
class BirthDeathConfig:
    lambda_b: float = 1.0
    virtual_time: float = 1.0
    max_jumps: int = 10_000
    rate_ceiling: float = 1e300

    def __post_init__(self):
        if not self.lambda_b > 0:
            raise ValueError(f"lambda_b must be positive, got {self.lambda_b}")
        if not self.virtual_time > 0:
            raise ValueError(f"virtual_time must be positive, got {self.virtual_time}")
        if self.max_jumps < 1:
            raise ValueError(f"max_jumps must be >= 1, got {self.max_jumps}")


@dataclass(frozen=True)
class Birth:
    pass


@dataclass(frozen=True)
class Death:
    index: int


@dataclass
class BirthDeathLog:
    births: int = 0
    deaths: int = 0
    jumps: int = 0
    truncated: bool = False


def log_likelihood_without(state: MixtureState, data) -> tuple[float, np.ndarray]:
    """Full log-likelihood and, per component j, the log-likelihood of the state with j removed.

    The reduced mixtures renormalise the remaining weights by 1/(1 - pi_j),
    exactly as :func:`volmix.mixture.death` does.
    """
    logc = component_log_densities(state, data)
    full = float(logsumexp_rows(logc).sum())
    k = state.k
    if k == 1:
        return full, np.array([-math.inf])
    n = logc.shape[0]
    reduced = np.empty(k)
    for j in range(k):
        if state.weights[j] >= 1.0:
            # every other weight is 0: nothing left to renormalise, never dies
            reduced[j] = -math.inf
            continue
        others = np.delete(logc, j, axis=1)
        reduced[j] = logsumexp_rows(others).sum() - n * math.log1p(-state.weights[j])
    return full, reduced


def log_death_rates(state: MixtureState, data, priors: MixturePriors, cfg: BirthDeathConfig) -> np.ndarray:
    """log delta_j = log lambda_b + [logL(without j) - logL] + log p(k-1) - log(k p(k)).

    ``data=None`` drops the likelihood ratio (prior-only sampling).
    """
    k = state.k
    log_pk_ratio = (truncated_poisson_logpmf(k - 1, priors.lam, priors.kmax)
                    - math.log(k) - truncated_poisson_logpmf(k, priors.lam, priors.kmax))
    if log_pk_ratio == -math.inf:
        return np.full(k, -math.inf)
    if data is None:
        log_lr = np.zeros(k)
    else:
        full, reduced = log_likelihood_without(state, data)
        log_lr = reduced - full
    return math.log(cfg.lambda_b) + log_lr + log_pk_ratio


def death_rates(state: MixtureState, data, priors: MixturePriors, cfg: BirthDeathConfig) -> np.ndarray:
    logd = log_death_rates(state, data, priors, cfg)
    with np.errstate(over="ignore"):
        rates = np.exp(np.minimum(logd, math.log(cfg.rate_ceiling)))
    return np.minimum(rates, cfg.rate_ceiling)


def simulate_jump(state: MixtureState, rates, cfg: BirthDeathConfig, rng: RngStream,
                  birth_rate: float | None = None):
    """Draw (event, waiting time) for the competing birth and death clocks."""
    lam_b = cfg.lambda_b if birth_rate is None else birth_rate
    rates = np.asarray(rates, dtype=float)
    total = lam_b + rates.sum()
    if not total > 0:
        raise ValueError("total jump rate must be positive")
    gen = rng.generator
    wait = gen.exponential(1.0 / total)
    cumulative = np.cumsum(np.concatenate(([lam_b], rates)))
    idx = categorical_index(cumulative, gen.random())
    return (Birth() if idx == 0 else Death(idx - 1)), wait


def sample_birth_point(state: MixtureState, priors: MixturePriors, rng: RngStream) -> tuple[float, float, float]:
    """pi ~ Beta(1, k) (density k(1-pi)^(k-1)); (mu, s) from the component prior."""
    gen = rng.generator
    k = state.k
    pi = gen.beta(1.0, k)
    # pi in (0,1) strictly; Beta(1, k) can return 0 in floating point for large k
    pi = min(max(pi, np.finfo(float).tiny), 1.0 - np.finfo(float).eps)
    mu = gen.normal(priors.zeta, 1.0 / math.sqrt(priors.tau))
    s = gen.gamma(priors.precision_shape, 1.0 / priors.precision_rate)
    s = max(s, np.finfo(float).tiny)
    return pi, mu, s


def run_birth_death(state: MixtureState, data, priors: MixturePriors, cfg: BirthDeathConfig,
                    rng: RngStream, log: BirthDeathLog | None = None) -> MixtureState:
    """Simulate the jump process for ``cfg.virtual_time`` units of virtual time.

    Births are switched off at k = kmax. Pass ``data=None`` to sample from the
    prior (likelihood ratio fixed at 1).
    """
    if log is None:
        log = BirthDeathLog()
    t = 0.0
    jumps = 0
    while True:
        if jumps >= cfg.max_jumps:
            log.truncated = True
            break
        rates = death_rates(state, data, priors, cfg)
        lam_b = 0.0 if state.k >= priors.kmax else cfg.lambda_b
        if lam_b + rates.sum() <= 0:
            # only reachable with kmax = 1
            break
        event, wait = simulate_jump(state, rates, cfg, rng, birth_rate=lam_b)
        t += wait
        if t > cfg.virtual_time:
            break
        if isinstance(event, Birth):
            state = birth(state, sample_birth_point(state, priors, rng))
            log.births += 1
        else:
            state = death(state, event.index)
            log.deaths += 1
        jumps += 1
    log.jumps += jumps
    return state
