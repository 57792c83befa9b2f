"""Stochastic volatility sampler with Gaussian-mixture return innovations.

    y_t = eps_t * exp(h_t / 2),    h_t = c + phi (h_{t-1} - c) + eta_t,
    eta_t ~ N(0, sigma_eta2),      eps_t ~ sum_i pi_i N(mu_i, 1 / s_i).

``h`` holds h_0..h_n; ``y`` holds y_1..y_n, so ``y[t - 1]`` pairs with ``h[t]``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .kernels import LOG_2PI, RngStream, beta_logpdf, logsumexp_rows
from .mixture import MixtureState

logger = logging.getLogger(__name__)


@dataclass
class SVState:
    h: np.ndarray
    c: float
    phi: float
    sigma_eta2: float

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        if not abs(self.phi) < 1:
            raise ValueError(f"|phi| must be < 1, got {self.phi}")
        if not self.sigma_eta2 > 0:
            raise ValueError(f"sigma_eta2 must be positive, got {self.sigma_eta2}")
        if not np.all(np.isfinite(self.h)):
            raise ValueError("h must be finite")

    @property
    def n(self) -> int:
        return self.h.size - 1

    def copy(self) -> "SVState":
        return SVState(self.h.copy(), self.c, self.phi, self.sigma_eta2)


@dataclass(frozen=True)
class SVPriors:
    c_mean: float = 0.0
    c_var: float = 10.0
    phi1: float = 20.0
    phi2: float = 1.5
    sigma_r: float = 5.0
    S_sigma: float = 0.05

    def __post_init__(self):
        for name in ("c_var", "phi1", "phi2", "sigma_r", "S_sigma"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")

    @property
    def phi_prior_mean(self) -> float:
        return 2.0 * self.phi1 / (self.phi1 + self.phi2) - 1.0


@dataclass
class AcceptanceStats:
    h_accepted: int = 0
    h_proposed: int = 0
    phi_accepted: int = 0
    phi_proposed: int = 0
    phi_skipped: int = 0
    level_accepted: int = 0
    level_proposed: int = 0

    @property
    def h_rate(self) -> float:
        return self.h_accepted / self.h_proposed if self.h_proposed else float("nan")

    @property
    def phi_rate(self) -> float:
        return self.phi_accepted / self.phi_proposed if self.phi_proposed else float("nan")

    @property
    def level_rate(self) -> float:
        return self.level_accepted / self.level_proposed if self.level_proposed else float("nan")


def sv_log_obs_density(y, h, mix: MixtureState):
    """log p(y | h): law of eps * exp(h/2) with eps drawn from the mixture."""
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    eps = (y * np.exp(-0.5 * h))[..., None]
    s = mix.precisions
    with np.errstate(divide="ignore"):
        logw = np.log(mix.weights)
    terms = logw + 0.5 * (np.log(s) - LOG_2PI) - 0.5 * s * (eps - mix.means) ** 2
    return logsumexp_rows(terms) - 0.5 * h


def residuals(y, h) -> np.ndarray:
    y = np.asarray(y, dtype=float)
    h = np.asarray(h, dtype=float)
    if y.shape != h.shape:
        raise ValueError(f"y and h must be aligned, got shapes {y.shape} and {h.shape}")
    return y * np.exp(-0.5 * h)


def h0_conditional(state: SVState) -> tuple[float, float]:
    """Mean and variance of h_0 given h_1: stationary prior times one transition."""
    return state.c + state.phi * (state.h[1] - state.c), state.sigma_eta2


def h_proposal_moments(state: SVState, sites: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Mean/variance of the AR(1) prior conditional of h_t given its neighbours (t >= 1)."""
    c, phi, s2 = state.c, state.phi, state.sigma_eta2
    x = state.h - c
    n = state.n
    mean = np.empty(sites.size)
    var = np.empty(sites.size)
    interior = sites < n
    ti = sites[interior]
    mean[interior] = c + phi * (x[ti - 1] + x[ti + 1]) / (1.0 + phi * phi)
    var[interior] = s2 / (1.0 + phi * phi)
    tn = sites[~interior]
    mean[~interior] = c + phi * x[tn - 1]
    var[~interior] = s2
    return mean, var


def update_h(state: SVState, mix: MixtureState, y, rng: RngStream,
             stats: AcceptanceStats | None = None, log_obs=None) -> np.ndarray:
    """Single-site update of h_0..h_n in two parity blocks (even sites, then odd).

    Sites of equal parity are conditionally independent given the others, so
    each block is a set of independent single-site moves. h_0 gets an exact
    Gibbs draw; every other site is an independence Metropolis step proposing
    from its AR(1) prior conditional and accepting on the observation density
    ratio. ``y=None`` drops observation terms (every proposal accepted).
    ``log_obs(y, h)`` overrides the observation log density.
    """
    if log_obs is None:
        def log_obs(yy, hh):
            return sv_log_obs_density(yy, hh, mix)
    gen = rng.generator
    h = state.h.copy()
    work = SVState(h, state.c, state.phi, state.sigma_eta2)
    n = state.n
    for parity in (0, 1):
        sites = np.arange(parity, n + 1, 2)
        if parity == 0:
            z0 = gen.standard_normal()
            m0, v0 = h0_conditional(work)
            h[0] = m0 + math.sqrt(v0) * z0
            sites = sites[1:]
        if sites.size == 0:
            continue
        mean, var = h_proposal_moments(work, sites)
        prop = mean + np.sqrt(var) * gen.standard_normal(sites.size)
        u = gen.random(sites.size)
        if y is None:
            accept = np.ones(sites.size, dtype=bool)
        else:
            yt = np.asarray(y, dtype=float)[sites - 1]
            log_ratio = log_obs(yt, prop) - log_obs(yt, h[sites])
            accept = np.log(u) < log_ratio
        h[sites] = np.where(accept, prop, h[sites])
        if stats is not None:
            stats.h_accepted += int(accept.sum())
            stats.h_proposed += int(sites.size)
    return h


def update_sigma_eta(state: SVState, priors: SVPriors, rng: RngStream) -> float:
    x = state.h - state.c
    phi = state.phi
    ss = priors.S_sigma + x[0] ** 2 * (1.0 - phi * phi) + np.sum((x[1:] - phi * x[:-1]) ** 2)
    shape = 0.5 * (priors.sigma_r + state.n + 1)
    scale = 0.5 * ss
    return float(1.0 / rng.generator.gamma(shape, 1.0 / scale))


def phi_log_target(phi: float, state: SVState, priors: SVPriors) -> float:
    """log g(phi): Beta prior on (phi+1)/2 times the stationary density of h_0 (phi part)."""
    if not abs(phi) < 1:
        return -math.inf
    x0 = state.h[0] - state.c
    one_m = 1.0 - phi * phi
    return (float(beta_logpdf(0.5 * (phi + 1.0), priors.phi1, priors.phi2))
            + 0.5 * math.log(one_m) - x0 * x0 * one_m / (2.0 * state.sigma_eta2))


def update_phi(state: SVState, priors: SVPriors, rng: RngStream,
               stats: AcceptanceStats | None = None, log_target=None) -> float:
    """Independence MH with the Gaussian transition-likelihood proposal N(phi_hat, V)."""
    if log_target is None:
        log_target = phi_log_target
    x = state.h - state.c
    denom = float(np.sum(x[:-1] ** 2))
    if not denom > 0:
        logger.warning("phi update skipped: sum of squared lagged deviations is zero")
        if stats is not None:
            stats.phi_skipped += 1
        return state.phi
    phi_hat = float(np.sum(x[1:] * x[:-1])) / denom
    V = state.sigma_eta2 / denom
    gen = rng.generator
    prop = phi_hat + math.sqrt(V) * gen.standard_normal()
    u = gen.random()
    if stats is not None:
        stats.phi_proposed += 1
    if not abs(prop) < 1:
        return state.phi
    log_ratio = log_target(prop, state, priors) - log_target(state.phi, state, priors)
    if math.log(u) < log_ratio:
        if stats is not None:
            stats.phi_accepted += 1
        return prop
    return state.phi


def c_conditional(state: SVState, priors: SVPriors) -> tuple[float, float]:
    """Posterior mean and variance of c given h, phi, sigma_eta2 under the N(c_mean, c_var) prior."""
    h, phi, s2 = state.h, state.phi, state.sigma_eta2
    n = state.n
    one_m = 1.0 - phi
    data_prec = ((1.0 - phi * phi) + n * one_m * one_m) / s2
    linear = ((1.0 - phi * phi) * h[0] + one_m * np.sum(h[1:] - phi * h[:-1])) / s2
    post_prec = data_prec + 1.0 / priors.c_var
    post_mean = (linear + priors.c_mean / priors.c_var) / post_prec
    return float(post_mean), 1.0 / post_prec


def update_c(state: SVState, priors: SVPriors, rng: RngStream) -> float:
    mean, var = c_conditional(state, priors)
    return mean + math.sqrt(var) * rng.generator.standard_normal()


def update_level(state: SVState, mix: MixtureState, y, priors: SVPriors, rng: RngStream,
                 stats: AcceptanceStats | None = None, log_obs=None) -> tuple[float, np.ndarray]:
    """Shift c and the whole path h by a common amount, deviations h - c held fixed.

    The AR(1) terms only see h - c, so the move targets the prior on c times the
    observation density. Without observations that is an exact prior draw;
    otherwise a random-walk Metropolis step scaled to the likelihood curvature.
    """
    if log_obs is None:
        def log_obs(yy, hh):
            return sv_log_obs_density(yy, hh, mix)
    gen = rng.generator
    x = state.h - state.c
    if y is None:
        c_new = priors.c_mean + math.sqrt(priors.c_var) * gen.standard_normal()
        return c_new, x + c_new
    y = np.asarray(y, dtype=float)
    step = 2.4 * math.sqrt(2.0 / y.size)
    prop = state.c + step * gen.standard_normal()
    u = gen.random()
    log_prior_ratio = ((state.c - priors.c_mean) ** 2 - (prop - priors.c_mean) ** 2) / (2.0 * priors.c_var)
    log_ratio = (log_prior_ratio + float(np.sum(log_obs(y, x[1:] + prop)))
                 - float(np.sum(log_obs(y, state.h[1:]))))
    if stats is not None:
        stats.level_proposed += 1
    if math.log(u) < log_ratio:
        if stats is not None:
            stats.level_accepted += 1
        return prop, x + prop
    return state.c, state.h


def sv_sweep(state: SVState, mix: MixtureState, y, priors: SVPriors, rng: RngStream,
             stats: AcceptanceStats | None = None, h_sweeps: int = 1,
             level_shift: bool = True) -> SVState:
    """h (``h_sweeps`` passes) -> sigma_eta2 -> phi -> c [-> joint level shift]."""
    state = state.copy()
    for _ in range(h_sweeps):
        state.h = update_h(state, mix, y, rng, stats)
    state.sigma_eta2 = update_sigma_eta(state, priors, rng)
    state.phi = update_phi(state, priors, rng, stats)
    state.c = update_c(state, priors, rng)
    if level_shift:
        state.c, state.h = update_level(state, mix, y, priors, rng, stats)
    return state


def sample_mixture(mix: MixtureState, n: int, rng: RngStream) -> np.ndarray:
    gen = rng.generator
    cum = np.cumsum(mix.weights)
    u = gen.random(n) * cum[-1]
    z = np.minimum((u[:, None] >= cum).sum(axis=1), mix.k - 1)
    return mix.means[z] + gen.standard_normal(n) / np.sqrt(mix.precisions[z])


def simulate_sv(c: float, phi: float, sigma_eta2: float, mix: MixtureState, n: int,
                rng: RngStream) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Forward-simulate (y_1..y_n, h_0..h_n, eps_1..eps_n)."""
    if not abs(phi) < 1:
        raise ValueError(f"|phi| must be < 1, got {phi}")
    if sigma_eta2 < 0:
        raise ValueError(f"sigma_eta2 must be non-negative, got {sigma_eta2}")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    gen = rng.generator
    sd = math.sqrt(sigma_eta2)
    h = np.empty(n + 1)
    h[0] = c + sd / math.sqrt(1.0 - phi * phi) * gen.standard_normal()
    eta = sd * gen.standard_normal(n)
    for t in range(1, n + 1):
        h[t] = c + phi * (h[t - 1] - c) + eta[t - 1]
    eps = sample_mixture(mix, n, rng)
    y = eps * np.exp(0.5 * h[1:])
    return y, h, eps
