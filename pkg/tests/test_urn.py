import math

import numpy as np
import pytest

from stakesim.core import PowerLaw, StakeState, ValidatorPricing
from stakesim.errors import ParameterError
from stakesim.rng import stream
from stakesim.urn import (
    EventOutcome,
    ReplacementDraw,
    SlashParams,
    adversarial_replacement_matrix,
    apply_replacement,
    dispersion_index,
    event_probabilities,
    fixed_point_visits,
    mixture_moments,
    ruin_probability,
    sample_terminal_stakes,
    survivor_scale,
)


class TestEventProbabilities:
    def test_no_slashing(self):
        state = StakeState(stakes=(1.0, 1.0))
        params = SlashParams(p=(0.0, 0.0), iota=0.25)
        assert event_probabilities(state, params, None, 0) == (0.5, 0.5, 0.0, 0.0)

    def test_slashing_no_loan(self):
        state = StakeState(stakes=(1.0, 1.0))
        params = SlashParams(p=(0.2, 0.0), iota=0.25)
        probs = event_probabilities(state, params, None, 0)
        assert probs == pytest.approx((0.4, 0.4, 0.2, 0.0))

    def test_default_indicator(self):
        # post-slash stake 0.75 falls below c * issuance = 0.9
        state = StakeState(stakes=(1.0, 1.0))
        params = SlashParams(p=(0.2, 0.0), iota=0.25)
        vp = ValidatorPricing(c=0.9, stake_at_issue=1.0, debt=0.5)
        probs = event_probabilities(state, params, vp, 0)
        assert probs == pytest.approx((0.4, 0.4, 0.0, 0.2))

    def test_sums_to_one_randomized(self):
        rng = np.random.default_rng(0)
        for _ in range(100_000):
            stakes = rng.uniform(0.01, 10.0, size=3)
            p = rng.uniform(0.0, 1.0, size=3)
            state = StakeState(stakes=tuple(stakes))
            params = SlashParams(p=tuple(p), iota=float(rng.uniform(0.01, 0.99)))
            i = int(rng.integers(3))
            vp = None
            if rng.random() < 0.5:
                vp = ValidatorPricing(
                    c=float(rng.uniform(0.05, 0.95)),
                    stake_at_issue=float(stakes[i] * rng.uniform(0.5, 2.0)),
                    debt=float(rng.uniform(0.0, 1.0)),
                )
            probs = event_probabilities(state, params, vp, i)
            assert abs(sum(probs) - 1.0) < 1e-12

    def test_zero_total_stake_rejected(self):
        state = StakeState(stakes=(0.0, 0.0))
        with pytest.raises(ParameterError):
            event_probabilities(state, SlashParams(p=(0.1, 0.1), iota=0.1), None, 0)


class TestApplyReplacement:
    def test_reward(self):
        state = StakeState(stakes=(3.0, 1.0))
        out = apply_replacement(state, ReplacementDraw(0, 1.0, EventOutcome.REWARDED))
        assert out.stakes == (4.0, 1.0)
        assert out.burned == 0.0

    def test_slash_burn(self):
        state = StakeState(stakes=(4.0, 1.0))
        out = apply_replacement(state, ReplacementDraw(0, -1.0, EventOutcome.SLASHED))
        assert out.stakes == (3.0, 1.0)
        assert out.burned == 1.0

    def test_default_zeroes(self):
        state = StakeState(stakes=(3.0, 1.0))
        out = apply_replacement(state, ReplacementDraw(1, -1.0, EventOutcome.DEFAULTED))
        assert out.stakes == (3.0, 0.0)
        assert out.burned == 1.0

    def test_conservation(self):
        rng = np.random.default_rng(1)
        state = StakeState(stakes=(5.0, 3.0, 2.0))
        for _ in range(200):
            i = int(rng.integers(3))
            if rng.random() < 0.5:
                draw = ReplacementDraw(i, 1.0, EventOutcome.REWARDED)
            else:
                draw = ReplacementDraw(i, -0.25 * state.stakes[i], EventOutcome.SLASHED)
            before = state.total_stake + state.burned
            state = apply_replacement(state, draw)
            after = state.total_stake + state.burned
            expected = before + (1.0 if draw.delta > 0 else 0.0)
            assert after == pytest.approx(expected)


def test_adversarial_matrix():
    mat = adversarial_replacement_matrix(2.0)
    assert mat.tolist() == [[4.0, -2.0], [0.0, 2.0]]
    with pytest.raises(ParameterError):
        adversarial_replacement_matrix(1.0, n=3)


class TestRuinProbability:
    def test_values(self):
        assert ruin_probability(0.0) == 0.0
        assert ruin_probability(1.0 / 3.0) == pytest.approx(0.5)
        assert ruin_probability(0.5) == 1.0
        assert ruin_probability(0.8) == 1.0

    def test_monte_carlo_birth_death(self):
        # +1 with prob 1-p, -1 with prob p, absorbed at 0 or at the escape
        # barrier; barrier 30x initial makes truncation bias negligible
        # next to the 99% binomial CI at 1e5 walks.
        barrier, n_walks = 30, 100_000
        for p in (0.1, 0.25, 0.4):
            rng = stream(2024, int(p * 100))
            position = np.ones(n_walks, dtype=np.int64)
            active = np.ones(n_walks, dtype=bool)
            ruined = np.zeros(n_walks, dtype=bool)
            while active.any():
                steps = np.where(rng.random(int(active.sum())) < p, -1, 1)
                position[active] += steps
                idx = np.nonzero(active)[0]
                ruined[idx[position[idx] == 0]] = True
                active[idx] = (position[idx] > 0) & (position[idx] < barrier)
            gamma = ruin_probability(p)
            freq = ruined.mean()
            half_width = 2.576 * math.sqrt(gamma * (1 - gamma) / n_walks)
            assert abs(freq - gamma) < half_width, (p, freq, gamma)


class TestTerminalStakeSampler:
    def test_no_ruin_branch(self):
        rng = stream(7)
        draws = sample_terminal_stakes(rng, 0.0, size=200_000)
        assert (draws == 0).sum() == 0
        assert draws.mean() == pytest.approx(1.0, abs=0.01)

    def test_atom_weight(self):
        rng = stream(8)
        draws = sample_terminal_stakes(rng, 0.25, size=400_000)
        assert (draws == 0).mean() == pytest.approx(1.0 / 3.0, abs=0.005)

    def test_mixture_mean(self):
        rng = stream(9)
        draws = sample_terminal_stakes(rng, 0.25, size=400_000)
        mean, second = mixture_moments(0.25)
        assert mean == pytest.approx(1.0)
        assert draws.mean() == pytest.approx(mean, abs=3 * draws.std() / math.sqrt(len(draws)))
        sq = draws**2
        assert sq.mean() == pytest.approx(second, abs=3 * sq.std() / math.sqrt(len(sq)))

    def test_growth_scaling(self):
        rng1, rng2 = stream(10), stream(10)
        base = sample_terminal_stakes(rng1, 0.1, reward=1.0, iota=0.05, h=0, size=100)
        grown = sample_terminal_stakes(rng2, 0.1, reward=1.0, iota=0.05, h=7, size=100)
        alpha = 1.0 * (1 - 0.1) - 0.05 * 0.1
        assert np.allclose(grown, base * math.exp(alpha * 7))

    def test_exponent_forms_agree_at_unit_reward_only(self):
        rng1, rng2 = stream(11), stream(11)
        a = sample_terminal_stakes(rng1, 0.2, reward=2.0, h=3, size=10, form="martingale")
        b = sample_terminal_stakes(rng2, 0.2, reward=2.0, h=3, size=10, form="drift")
        assert not np.allclose(a, b)

    def test_rejects_supercritical(self):
        with pytest.raises(ParameterError):
            sample_terminal_stakes(stream(1), 0.5, size=1)


class TestDispersionIndex:
    def test_values(self):
        assert dispersion_index(0.0) == 2.0
        assert dispersion_index(0.0, gamma=1.0, beta=1.0) == 1.0
        assert dispersion_index(0.25) == pytest.approx(13.0 / 6.0)

    def test_beta_gamma_from_p(self):
        assert survivor_scale(0.25) == pytest.approx(1.5)
        assert ruin_probability(0.25) == pytest.approx(1.0 / 3.0)


class TestFixedPointVisits:
    def test_degenerate_pinned_price(self):
        state = StakeState(stakes=(2.0, 2.0, 2.0))
        params = SlashParams(p=(0.0, 0.0, 0.0), iota=0.1)
        visits = fixed_point_visits(
            PowerLaw(1.0), state, params, horizon=500, epsilon=0.1, rng=stream(3), borrow=False
        )
        assert visits == 500

    def test_exact_hits_at_zero_epsilon(self):
        state = StakeState(stakes=(2.0, 2.0))
        params = SlashParams(p=(0.0, 0.0), iota=0.1)
        visits = fixed_point_visits(
            PowerLaw(1.0), state, params, horizon=200, epsilon=0.0, rng=stream(4), borrow=False
        )
        assert visits == 200

    def test_mild_slashing_recurs(self):
        n = 10
        state = StakeState(stakes=tuple(5.0 for _ in range(n)))
        params = SlashParams(p=tuple(0.05 for _ in range(n)), iota=0.1)
        visits = fixed_point_visits(
            PowerLaw(1.0), state, params, horizon=10_000, epsilon=0.1, rng=stream(5)
        )
        assert visits > 0
