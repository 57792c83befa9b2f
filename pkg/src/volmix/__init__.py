"""Bayesian stochastic volatility with Gaussian-mixture innovations of unknown order.

The number of mixture components is sampled with a birth-death point process;
the remaining parameters by Gibbs and Metropolis-within-Gibbs sweeps.
"""
from .birthdeath import BirthDeathConfig, death_rates, run_birth_death, sample_birth_point, simulate_jump
from .diagnostics import deviance, gelman_rubin, summarize
from .gibbs import mixture_sweep
from .kernels import RngStream
from .mixture import MixturePriors, MixtureState, birth, death, default_priors_from_data, log_likelihood, log_prior
from .pipeline import RunConfig, fit, sample_prior
from .sv import SVPriors, SVState, simulate_sv, sv_sweep

__version__ = "0.1.0"
