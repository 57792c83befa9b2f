import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from volmix.kernels import RngStream, truncated_poisson_logpmf
from volmix.mixture import (
    MixtureError,
    MixturePriors,
    MixtureState,
    birth,
    death,
    default_priors_from_data,
    initial_state,
    log_density,
    log_likelihood,
    log_point_process_prior,
    log_prior,
)

HALF_LOG_2PI = 0.5 * math.log(2 * math.pi)


def random_state(rng: np.random.Generator, k: int) -> MixtureState:
    w = rng.dirichlet(np.ones(k))
    return MixtureState(w, rng.normal(0, 2, k), rng.gamma(2.0, 1.0, k))


def mp_log_likelihood(state, data):
    """Direct double sum at 50 digits, no log-sum-exp."""
    with mpmath.workdps(50):
        total = mpmath.mpf(0)
        for y in data:
            dens = mpmath.mpf(0)
            for w, mu, s in zip(state.weights, state.means, state.precisions):
                w, mu, s, yy = (mpmath.mpf(float(v)) for v in (w, mu, s, y))
                dens += w * mpmath.sqrt(s / (2 * mpmath.pi)) * mpmath.exp(-s * (yy - mu) ** 2 / 2)
            total += mpmath.log(dens)
        return total


def oracle_log_prior(state, pri):
    k = state.k
    total = truncated_poisson_logpmf(k, pri.lam, pri.kmax)
    g = pri.gamma
    total += math.lgamma(k * g) - k * math.lgamma(g) + sum((g - 1) * math.log(w) for w in state.weights)
    a, rate = 2 * pri.alpha, 2 * pri.beta
    for mu, s in zip(state.means, state.precisions):
        total += -HALF_LOG_2PI + 0.5 * math.log(pri.tau) - 0.5 * pri.tau * (mu - pri.zeta) ** 2
        total += a * math.log(rate) - math.lgamma(a) + (a - 1) * math.log(s) - rate * s
    return total


@pytest.fixture
def priors():
    return MixturePriors(zeta=0.5, R=4.0, tau=1 / 16, lam=1.0, kmax=10, m=0.625, beta=0.7, gamma=1.3)


class TestMixtureState:
    def test_read_only(self):
        s = MixtureState([1.0], [0.0], [1.0])
        with pytest.raises(ValueError):
            s.weights[0] = 2.0

    @pytest.mark.parametrize("w,mu,s", [
        ([0.5, 0.6], [0, 0], [1, 1]),
        ([1.0], [0.0, 1.0], [1.0]),
        ([1.0], [0.0], [0.0]),
        ([1.0], [np.nan], [1.0]),
        ([], [], []),
        ([1.5, -0.5], [0, 0], [1, 1]),
    ])
    def test_invalid(self, w, mu, s):
        with pytest.raises(MixtureError):
            MixtureState(w, mu, s)

    def test_variances(self):
        assert np.array_equal(MixtureState([0.5, 0.5], [0, 1], [4.0, 0.5]).variances, [0.25, 2.0])


class TestLogLikelihood:
    def test_single_standard_normal(self):
        assert log_likelihood(MixtureState([1.0], [0.0], [1.0]), [0.0]) == pytest.approx(-0.9189385, abs=1e-7)

    def test_duplicate_components_collapse(self):
        s = MixtureState([0.5, 0.5], [0.0, 0.0], [1.0, 1.0])
        assert log_likelihood(s, [0.0]) == pytest.approx(-HALF_LOG_2PI, abs=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_extended_precision_oracle(self, seed):
        rng = np.random.default_rng(seed)
        state = random_state(rng, 3)
        data = rng.normal(0, 3, 5)
        expected = float(mp_log_likelihood(state, data))
        assert abs(log_likelihood(state, data) - expected) <= 1e-12 * max(1.0, abs(expected))

    def test_far_tail_is_finite(self):
        state = MixtureState([0.5, 0.5], [0.0, 1.0], [100.0, 100.0])
        ll = log_likelihood(state, [1e4])
        assert np.isfinite(ll)
        assert ll == pytest.approx(float(mp_log_likelihood(state, [1e4])), rel=1e-12)

    def test_empty_data_rejected(self):
        with pytest.raises(MixtureError):
            log_likelihood(MixtureState.standard_normal(), [])

    def test_zero_weight_component_ignored(self):
        a = MixtureState([1.0, 0.0], [0.0, 5.0], [1.0, 1.0])
        b = MixtureState([1.0], [0.0], [1.0])
        y = [0.3, -1.2]
        assert log_likelihood(a, y) == log_likelihood(b, y)

    def test_log_density_pointwise_sum(self):
        rng = np.random.default_rng(9)
        state = random_state(rng, 4)
        y = rng.normal(size=7)
        assert log_density(state, y).sum() == pytest.approx(log_likelihood(state, y), rel=1e-14)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**32), st.data())
    def test_permutation_invariance(self, k, seed, data):
        rng = np.random.default_rng(seed)
        state = random_state(rng, k)
        y = rng.normal(0, 2, 6)
        order = data.draw(st.permutations(range(k)))
        perm = state.permuted(order)
        assert log_likelihood(perm, y) == pytest.approx(log_likelihood(state, y), abs=1e-12)
        pri = MixturePriors(zeta=0.0, R=2.0, tau=0.25)
        assert log_prior(perm, pri) == pytest.approx(log_prior(state, pri), abs=1e-12)


class TestLogPrior:
    def test_above_kmax(self, priors):
        k = priors.kmax + 1
        s = MixtureState(np.full(k, 1 / k), np.zeros(k), np.ones(k))
        assert log_prior(s, priors) == -math.inf
        assert log_point_process_prior(s, priors) == -math.inf

    def test_single_component_has_no_weight_term(self, priors):
        s = MixtureState([1.0], [0.2], [1.5])
        assert log_prior(s, priors) == pytest.approx(log_point_process_prior(s, priors), abs=0)

    @pytest.mark.parametrize("seed", range(5))
    def test_term_by_term_oracle(self, seed, priors):
        rng = np.random.default_rng(seed)
        state = random_state(rng, int(rng.integers(1, 8)))
        assert log_prior(state, priors) == pytest.approx(oracle_log_prior(state, priors), abs=1e-12)


class TestMoves:
    def test_birth_example(self):
        s = birth(MixtureState([1.0], [0.0], [1.0]), (0.25, 1.0, 0.25))
        assert np.array_equal(s.weights, [0.75, 0.25])
        assert np.array_equal(s.means, [0.0, 1.0])
        assert np.array_equal(s.precisions, [1.0, 0.25])

    def test_death_example(self):
        s = death(MixtureState([0.75, 0.25], [0.0, 1.0], [1.0, 0.25]), 1)
        assert np.array_equal(s.weights, [1.0])
        assert np.array_equal(s.means, [0.0])
        assert np.array_equal(s.precisions, [1.0])

    def test_tiny_birth_keeps_weights(self):
        base = MixtureState([0.2, 0.3, 0.5], [0, 1, 2], [1, 1, 1])
        s = birth(base, (1e-15, 0.0, 1.0))
        assert np.allclose(s.weights[:3], base.weights, rtol=0, atol=1e-12)

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 9), st.integers(0, 2**32), st.floats(1e-9, 1 - 1e-9))
    def test_death_inverts_birth(self, k, seed, pi):
        rng = np.random.default_rng(seed)
        state = random_state(rng, k)
        born = birth(state, (pi, rng.normal(), rng.gamma(2.0)))
        assert abs(born.weights.sum() - 1.0) <= 1e-12
        back = death(born, born.k - 1)
        assert np.array_equal(back.means, state.means)
        assert np.array_equal(back.precisions, state.precisions)
        assert np.allclose(back.weights, state.weights, rtol=0, atol=1e-15)

    def test_random_move_sequences_stay_on_simplex(self):
        rng = np.random.default_rng(2024)
        state = MixtureState.standard_normal()
        worst = 0.0
        for _ in range(10_000):
            if state.k == 1 or (state.k < 10 and rng.random() < 0.5):
                state = birth(state, (rng.beta(1, state.k), rng.normal(), rng.gamma(2.0)))
            else:
                state = death(state, int(rng.integers(state.k)))
            worst = max(worst, abs(state.weights.sum() - 1.0))
        assert worst <= 1e-12

    @pytest.mark.parametrize("pi", [0.0, 1.0, -0.1, 1.5])
    def test_birth_weight_domain(self, pi):
        with pytest.raises(MixtureError):
            birth(MixtureState.standard_normal(), (pi, 0.0, 1.0))

    def test_birth_at_kmax(self):
        s = MixtureState([0.5, 0.5], [0, 1], [1, 1])
        with pytest.raises(MixtureError):
            birth(s, (0.5, 0.0, 1.0), kmax=2)

    def test_death_errors(self):
        with pytest.raises(MixtureError):
            death(MixtureState.standard_normal(), 0)
        with pytest.raises(MixtureError):
            death(MixtureState([0.5, 0.5], [0, 1], [1, 1]), 2)


class TestPriorsFromData:
    def test_range_minus_one_to_three(self):
        p = default_priors_from_data([-1.0, 0.5, 3.0])
        assert (p.zeta, p.R, p.tau) == (1.0, 4.0, 0.0625)
        assert p.m == pytest.approx(0.625, rel=1e-15)
        assert (p.alpha, p.l, p.gamma) == (2.0, 0.2, 1.0)

    def test_range_zero_to_two(self):
        p = default_priors_from_data([0.0, 2.0])
        assert (p.zeta, p.R, p.tau) == (1.0, 2.0, 0.25)
        assert p.m == pytest.approx(2.5, rel=1e-15)

    def test_constant_data(self):
        with pytest.raises(MixtureError):
            default_priors_from_data([1.0, 1.0, 1.0])

    def test_too_short(self):
        with pytest.raises(MixtureError):
            default_priors_from_data([1.0])

    def test_beta_drawn_from_prior(self):
        # beta ~ Gamma(shape 2l, scale 1/(2m)): mean l/m
        y = [0.0, 2.0]
        draws = np.array([default_priors_from_data(y, rng=RngStream(0, i)).beta for i in range(20_000)])
        se = draws.std(ddof=1) / math.sqrt(draws.size)
        assert abs(draws.mean() - 0.2 / 2.5) <= 3 * se
        assert np.all(draws > 0)

    def test_priors_validate(self):
        with pytest.raises(MixtureError):
            MixturePriors(zeta=0.0, R=1.0, tau=0.0)
        with pytest.raises(MixtureError):
            MixturePriors(zeta=0.0, R=1.0, tau=1.0, kmax=0)


def test_initial_state_is_valid():
    y = np.random.default_rng(0).normal(size=50)
    s = initial_state(y, 3, RngStream(1))
    assert s.k == 3
    assert np.all(np.diff(np.sort(s.means)) > 0)
    assert s.weights.sum() == pytest.approx(1.0, abs=1e-15)
