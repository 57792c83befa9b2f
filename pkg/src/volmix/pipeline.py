"""Multi-chain orchestration of the mixture / stochastic-volatility fit."""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from typing import Optional

import numpy as np

from .birthdeath import BirthDeathConfig, BirthDeathLog
from .diagnostics import (
    DiagnosticsError,
    SummaryRow,
    deviance,
    gelman_rubin,
    k_posterior,
    modal_k,
    summarize,
)
from .gibbs import mixture_sweep
from .kernels import RngStream
from .mixture import (
    MixturePriors,
    MixtureState,
    default_priors_from_data,
    initial_state,
    log_likelihood,
)
from .sv import AcceptanceStats, SVPriors, SVState, residuals, sv_sweep

logger = logging.getLogger(__name__)

MODES = ("bd-init", "full-bd")
MODELS = ("sv", "mixture")
RHAT_THRESHOLD = 1.1
ACCEPTANCE_BAND = (0.1, 0.9)


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    chains: int = 2
    iterations: int = 1000
    burnin: int = 100
    thin: int = 1
    seed: int = 0
    kmax: int = 10
    lam: float = 1.0
    lambda_b: float = 1.0
    virtual_time: float = 1.0
    mode: str = "bd-init"
    fixed_k: Optional[int] = None
    k_init: Optional[int] = None
    model: str = "sv"
    standard_innovations: bool = False
    init_weights: Optional[tuple] = None
    init_means: Optional[tuple] = None
    init_variances: Optional[tuple] = None
    save_h: bool = False
    split_rhat: bool = False
    workers: int = 1
    max_jumps: int = 10_000
    h_sweeps: int = 5
    level_shift: bool = True

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.chains < 1:
            raise ConfigError("chains must be >= 1")
        if not (self.iterations > self.burnin >= 0):
            raise ConfigError("need iterations > burnin >= 0")
        if self.thin < 1:
            raise ConfigError("thin must be >= 1")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}, got {self.model!r}")
        if self.kmax < 1:
            raise ConfigError("kmax must be >= 1")
        if self.fixed_k is not None and not 1 <= self.fixed_k <= self.kmax:
            raise ConfigError("fixed_k must lie in 1..kmax")
        if self.k_init is not None and not 1 <= self.k_init <= self.kmax:
            raise ConfigError("k_init must lie in 1..kmax")
        if self.standard_innovations:
            if self.model != "sv":
                raise ConfigError("standard_innovations requires model = sv")
            if self.fixed_k not in (None, 1):
                raise ConfigError("standard_innovations implies fixed_k = 1")
            self.fixed_k = 1
        if not (self.lam > 0 and self.lambda_b > 0 and self.virtual_time > 0):
            raise ConfigError("lambda, lambda_b and virtual_time must be positive")
        start = [self.init_weights, self.init_means, self.init_variances]
        if any(v is not None for v in start):
            if any(v is None for v in start):
                raise ConfigError("init_weights, init_means and init_variances go together")
            if not len(self.init_weights) == len(self.init_means) == len(self.init_variances):
                raise ConfigError("start-state vectors must have equal length")
        if self.h_sweeps < 1:
            raise ConfigError("h_sweeps must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")

    @property
    def two_stage(self) -> bool:
        return self.fixed_k is None and self.mode == "bd-init"

    @property
    def bd_config(self) -> BirthDeathConfig:
        return BirthDeathConfig(self.lambda_b, self.virtual_time, self.max_jumps)

    def retained(self) -> range:
        return range(self.burnin, self.iterations, self.thin)

    def start_mixture(self) -> Optional[MixtureState]:
        if self.init_weights is None:
            return None
        # start-state scales are read as variances
        w = np.asarray(self.init_weights, dtype=float)
        return MixtureState(w / w.sum(), self.init_means, 1.0 / np.asarray(self.init_variances, dtype=float))

    def echo(self) -> list[str]:
        return [f"{f.name} = {getattr(self, f.name)}" for f in fields(self)]


@dataclass
class ChainResult:
    chain: int
    scalars: dict = field(default_factory=dict)
    components: list = field(default_factory=list)
    h_draws: Optional[np.ndarray] = None
    stats: AcceptanceStats = field(default_factory=AcceptanceStats)
    bd_log: BirthDeathLog = field(default_factory=BirthDeathLog)
    stage1_k: list = field(default_factory=list)


@dataclass
class FitResult:
    config: RunConfig
    chains: list
    k_report: int
    stage1_modal_k: Optional[int]
    rows: list
    kposterior: list
    warnings: list
    n_obs: int
    h_summary: Optional[np.ndarray] = None

    def parameter_order(self) -> list[str]:
        return [r.parameter for r in self.rows]


# ---------------------------------------------------------------- chain work

def _mixture_start(cfg: RunConfig, y: np.ndarray, k: int, rng: RngStream) -> MixtureState:
    start = cfg.start_mixture()
    if start is not None and start.k == k:
        return start
    return initial_state(y, k, rng)


def _stage1(args):
    """BD + mixture Gibbs on the raw returns; returns k chain and last state per k."""
    cfg, y, chain = args
    rng = RngStream(cfg.seed, 2 * chain)
    priors = default_priors_from_data(y, cfg.lam, cfg.kmax, rng)
    k0 = cfg.k_init or (cfg.start_mixture().k if cfg.init_weights is not None else 1)
    state = _mixture_start(cfg, y, k0, rng)
    bd_log = BirthDeathLog()
    ks = []
    last = {}
    for _ in range(cfg.iterations):
        state, priors = mixture_sweep(state, y, priors, rng, cfg.bd_config, bd_log)
        ks.append(state.k)
        last[state.k] = (state, priors)
    return ks, last, bd_log


def _sv_start(y: np.ndarray, mix: MixtureState, sv_priors: SVPriors) -> SVState:
    # match the returns' second moment given the mixture's, phi and sigma at prior means
    second = float(np.sum(mix.weights * (mix.means ** 2 + mix.variances)))
    c0 = math.log(float(np.mean(y ** 2)) / second)
    s2 = sv_priors.S_sigma / (sv_priors.sigma_r - 2.0) if sv_priors.sigma_r > 2 else 0.01
    return SVState(np.full(y.size + 1, c0), c0, sv_priors.phi_prior_mean, s2)


def _stage2(args):
    """Joint fit: mixture sweep on current residuals, then the SV sweep."""
    cfg, y, chain, start = args
    rng = RngStream(cfg.seed, 2 * chain + 1)
    result = ChainResult(chain)
    if start is None:
        k = cfg.fixed_k or cfg.k_init or 1
        mix = MixtureState.standard_normal() if cfg.standard_innovations else _mixture_start(cfg, y, k, rng)
        priors = default_priors_from_data(y, cfg.lam, cfg.kmax, rng)
    else:
        mix, priors = start
    bd = cfg.bd_config if (cfg.fixed_k is None and cfg.mode == "full-bd") else None
    sv_priors = SVPriors()
    sv_state = _sv_start(y, mix, sv_priors) if cfg.model == "sv" else None
    keep = set(cfg.retained())
    scalars = {name: [] for name in _scalar_names(cfg)}
    h_draws = [] if (cfg.save_h and cfg.model == "sv") else None
    for it in range(cfg.iterations):
        if cfg.model == "sv":
            if not cfg.standard_innovations:
                eps = residuals(y, sv_state.h[1:])
                mix, priors = mixture_sweep(mix, eps, priors, rng, bd, result.bd_log)
            sv_state = sv_sweep(sv_state, mix, y, sv_priors, rng, result.stats, cfg.h_sweeps,
                                    cfg.level_shift)
        else:
            mix, priors = mixture_sweep(mix, y, priors, rng, bd, result.bd_log)
        if it not in keep:
            continue
        scalars["k"].append(mix.k)
        if cfg.model == "sv":
            scalars["c"].append(sv_state.c)
            scalars["phi"].append(sv_state.phi)
            scalars["sigma_eta"].append(math.sqrt(sv_state.sigma_eta2))
            scalars["deviance"].append(deviance(mix, sv_state.h[1:], y))
            if h_draws is not None:
                h_draws.append(sv_state.h.copy())
        else:
            scalars["deviance"].append(-2.0 * log_likelihood(mix, y))
        result.components.append((mix.weights.copy(), mix.means.copy(), mix.precisions.copy()))
    result.scalars = {name: np.asarray(v, dtype=float) for name, v in scalars.items()}
    if h_draws is not None:
        result.h_draws = np.asarray(h_draws)
    return result


def _scalar_names(cfg: RunConfig) -> list[str]:
    if cfg.model == "sv":
        return ["k", "c", "phi", "sigma_eta", "deviance"]
    return ["k", "deviance"]


def _map(cfg: RunConfig, func, jobs):
    if cfg.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=min(cfg.workers, len(jobs))) as pool:
            return list(pool.map(func, jobs))
    return [func(job) for job in jobs]


# ------------------------------------------------------------------ fit

def fit(config: RunConfig, data) -> FitResult:
    y = np.asarray(getattr(data, "values", data), dtype=float)
    if y.size < 2 or not np.all(np.isfinite(y)):
        raise ConfigError("data must contain at least two finite values")
    warnings: list[str] = []
    stage1_modal = None
    starts = [None] * config.chains
    stage1 = None
    if config.two_stage:
        stage1 = _map(config, _stage1, [(config, y, c) for c in range(config.chains)])
        pooled = [k for ks, _, _ in stage1 for k in ks[config.burnin:]]
        stage1_modal = modal_k(pooled)
        for c, (_, last, _) in enumerate(stage1):
            if stage1_modal in last:
                starts[c] = last[stage1_modal]
            else:
                warnings.append(f"chain {c} never visited k = {stage1_modal} in stage 1; "
                                f"starting stage 2 from a quantile initialisation")
                rng = RngStream(config.seed, 2 * c)
                starts[c] = (initial_state(y, stage1_modal, rng),
                             default_priors_from_data(y, config.lam, config.kmax, rng))
        stage2_cfg = _replace_config(config, fixed_k=stage1_modal)
    else:
        stage2_cfg = config
    chains = _map(config, _stage2, [(stage2_cfg, y, c, starts[c]) for c in range(config.chains)])
    if stage1 is not None:
        for res, (ks, _, log) in zip(chains, stage1):
            res.stage1_k = ks
            res.bd_log.births += log.births
            res.bd_log.deaths += log.deaths
            res.bd_log.jumps += log.jumps
            res.bd_log.truncated |= log.truncated
    all_k = np.concatenate([r.scalars["k"] for r in chains]).astype(int)
    k_report = stage2_cfg.fixed_k if stage2_cfg.fixed_k is not None else modal_k(all_k)
    rows = summary_rows(chains, k_report, config, warnings)
    warnings.extend(_acceptance_warnings(chains, config))
    h_summary = None
    if config.save_h and config.model == "sv":
        h = np.concatenate([r.h_draws for r in chains], axis=0)
        h_summary = np.column_stack([h.mean(axis=0), np.quantile(h, [0.025, 0.5, 0.975], axis=0).T])
    for w in warnings:
        logger.warning(w)
    return FitResult(config, chains, int(k_report), stage1_modal, rows, k_posterior(all_k),
                     warnings, int(y.size), h_summary)


def _replace_config(cfg: RunConfig, **changes) -> RunConfig:
    values = {f.name: getattr(cfg, f.name) for f in fields(cfg)}
    values.update(changes)
    return RunConfig(**values)


def _rhat(per_chain: list, split: bool, name: str, warnings: list) -> float:
    if len(per_chain) < 2:
        return float("nan")
    n = min(len(c) for c in per_chain)
    if n < 2:
        warnings.append(f"{name}: fewer than 2 draws per chain; R-hat not computed")
        return float("nan")
    try:
        return gelman_rubin(np.array([c[:n] for c in per_chain]), split=split)
    except DiagnosticsError as exc:
        warnings.append(f"{name}: {exc}")
        return float("nan")


def component_chains(chains: list, k: int) -> dict[str, list]:
    """Per-chain component draws from iterations whose k equals ``k``."""
    out = {}
    for label, idx in (("mu", 1), ("pi", 0), ("prec", 2)):
        for i in range(k):
            out[f"{label}[{i + 1}]"] = [
                np.array([comp[idx][i] for comp in r.components if comp[0].size == k]) for r in chains]
    return out


def parameter_order(model: str, k: int) -> list[str]:
    mus = [f"mu[{i}]" for i in range(1, k + 1)]
    pis = [f"pi[{i}]" for i in range(1, k + 1)]
    precs = [f"prec[{i}]" for i in range(1, k + 1)]
    if model == "sv":
        return ["c", *mus, "phi", *pis, "sigma_eta", *precs, "deviance"]
    return [*mus, *pis, *precs, "deviance"]


def summary_rows(chains: list, k: int, cfg: RunConfig, warnings: list) -> list[SummaryRow]:
    comp = component_chains(chains, k)
    rows = []
    for name in parameter_order(cfg.model, k):
        per_chain = comp[name] if name in comp else [r.scalars[name] for r in chains]
        pooled = np.concatenate(per_chain)
        if pooled.size == 0:
            warnings.append(f"{name}: no retained draws at k = {k}")
            continue
        rhat = _rhat(per_chain, cfg.split_rhat, name, warnings)
        if rhat > RHAT_THRESHOLD:
            warnings.append(f"{name}: R-hat {rhat:.3f} exceeds {RHAT_THRESHOLD}")
        rows.append(summarize(pooled, rhat, name))
    return rows


def _acceptance_warnings(chains: list, cfg: RunConfig) -> list[str]:
    out = []
    if cfg.model != "sv":
        return out
    lo, hi = ACCEPTANCE_BAND
    for r in chains:
        for label, rate in (("h", r.stats.h_rate), ("phi", r.stats.phi_rate)):
            if math.isfinite(rate) and not lo <= rate <= hi:
                out.append(f"chain {r.chain}: {label} acceptance rate {rate:.3f} outside [{lo}, {hi}]")
    return out


# ----------------------------------------------------------- prior sampling

def sample_prior(sweeps: int, n_latent: int = 10, seed: int = 0, lam: float = 1.0, kmax: int = 10,
                 lambda_b: float = 1.0, virtual_time: float = 1.0, k_init: int = 1,
                 level_shift: bool = True, mixture_priors: MixturePriors | None = None, sv_priors: SVPriors | None = None) -> dict:
    """Run BD + mixture Gibbs + SV sweeps with every likelihood term switched off.

    The returned chains should reproduce the priors: truncated Poisson on k,
    and the (c, phi, sigma_eta2) priors.
    """
    rng = RngStream(seed, 0)
    if mixture_priors is None:
        mixture_priors = MixturePriors(zeta=0.0, R=1.0, tau=1.0, lam=lam, kmax=kmax, m=1.0, beta=0.2)
    sv_priors = sv_priors or SVPriors()
    bd = BirthDeathConfig(lambda_b, virtual_time)
    mix = MixtureState(np.full(k_init, 1.0 / k_init), np.zeros(k_init), np.ones(k_init))
    sv_state = SVState(np.zeros(n_latent + 1), 0.0, sv_priors.phi_prior_mean,
                       sv_priors.S_sigma / (sv_priors.sigma_r - 2.0))
    names = ("k", "c", "phi", "sigma_eta2", "beta", "mu1", "prec1", "pi1")
    out = {name: np.empty(sweeps) for name in names}
    for it in range(sweeps):
        mix, mixture_priors = mixture_sweep(mix, None, mixture_priors, rng, bd)
        sv_state = sv_sweep(sv_state, mix, None, sv_priors, rng, level_shift=level_shift)
        out["k"][it] = mix.k
        out["c"][it] = sv_state.c
        out["phi"][it] = sv_state.phi
        out["sigma_eta2"][it] = sv_state.sigma_eta2
        out["beta"][it] = mixture_priors.beta
        out["mu1"][it] = mix.means[0]
        out["prec1"][it] = mix.precisions[0]
        out["pi1"][it] = mix.weights[0]
    return out
