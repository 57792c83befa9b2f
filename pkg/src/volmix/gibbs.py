"""Fixed-k conditional updates for the mixture, via latent allocations."""
from __future__ import annotations

import numpy as np

from .birthdeath import BirthDeathConfig, BirthDeathLog, run_birth_death
from .kernels import RngStream
from .mixture import MixturePriors, MixtureState, component_log_densities

_TINY = np.finfo(float).tiny


def allocation_probabilities(state: MixtureState, data) -> np.ndarray:
    logc = component_log_densities(state, data)
    e = np.exp(logc - logc.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def sample_allocations(state: MixtureState, data, rng: RngStream) -> np.ndarray:
    """One categorical draw per observation: single uniform against the cumulative row."""
    y = np.asarray(data, dtype=float)
    if state.k == 1:
        return np.zeros(y.size, dtype=np.int64)
    cum = np.cumsum(allocation_probabilities(state, y), axis=1)
    u = rng.generator.random(y.size) * cum[:, -1]
    z = (u[:, None] >= cum).sum(axis=1)
    return np.minimum(z, state.k - 1)


def _counts_and_sums(z, data, k):
    y = np.asarray(data, dtype=float)
    counts = np.bincount(z, minlength=k).astype(float)
    sums = np.bincount(z, weights=y, minlength=k)
    return counts, sums


def means_conditional(state: MixtureState, data, z, priors: MixturePriors) -> tuple[np.ndarray, np.ndarray]:
    """Per-component mean and variance of mu_i given allocations and precisions."""
    counts, sums = _counts_and_sums(z, data, state.k)
    s = state.precisions
    post_prec = s * counts + priors.tau
    post_mean = (s * sums + priors.tau * priors.zeta) / post_prec
    return post_mean, 1.0 / post_prec


def update_means(state: MixtureState, data, z, priors: MixturePriors, rng: RngStream) -> np.ndarray:
    mean, var = means_conditional(state, data, z, priors)
    return mean + rng.generator.standard_normal(state.k) * np.sqrt(var)


def update_precisions(state: MixtureState, data, z, priors: MixturePriors, rng: RngStream) -> np.ndarray:
    y = np.asarray(data, dtype=float)
    counts = np.bincount(z, minlength=state.k).astype(float)
    ss = np.bincount(z, weights=(y - state.means[z]) ** 2, minlength=state.k)
    shape = priors.precision_shape + 0.5 * counts
    rate = priors.precision_rate + 0.5 * ss
    return np.maximum(rng.generator.gamma(shape, 1.0 / rate), _TINY)


def update_weights(state: MixtureState, z, priors: MixturePriors, rng: RngStream) -> np.ndarray:
    counts = np.bincount(z, minlength=state.k).astype(float)
    if state.k == 1:
        return np.ones(1)
    g = np.maximum(rng.generator.gamma(priors.gamma + counts), _TINY)
    w = g / g.sum()
    return w / w.sum()


def update_beta_hyper(state: MixtureState, priors: MixturePriors, rng: RngStream) -> float:
    """beta | s ~ Gamma(shape 2l + 2k alpha, rate 2m + 2 sum s)."""
    shape = 2.0 * priors.l + 2.0 * state.k * priors.alpha
    rate = 2.0 * priors.m + 2.0 * state.precisions.sum()
    return max(float(rng.generator.gamma(shape, 1.0 / rate)), _TINY)


def mixture_sweep(state: MixtureState, data, priors: MixturePriors, rng: RngStream,
                  bd: BirthDeathConfig | None = None, bd_log: BirthDeathLog | None = None):
    """One sweep: [birth-death] -> allocations -> means -> precisions -> weights -> beta.

    ``data=None`` runs the sweep against the prior alone. Returns the new state
    and the updated priors (which carry the new beta).
    """
    y = np.empty(0) if data is None else np.asarray(data, dtype=float)
    if bd is not None:
        state = run_birth_death(state, None if data is None else y, priors, bd, rng, bd_log)
    z = sample_allocations(state, y, rng)
    means = update_means(state, y, z, priors, rng)
    state = MixtureState(state.weights, means, state.precisions)
    precs = update_precisions(state, y, z, priors, rng)
    state = MixtureState(state.weights, means, precs)
    weights = update_weights(state, z, priors, rng)
    state = MixtureState(weights, means, precs)
    priors = priors.with_beta(update_beta_hyper(state, priors, rng))
    return state, priors
