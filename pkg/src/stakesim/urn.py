"""Slashing probability space and generalized urn stake dynamics.

Each block, one validator is selected in proportion to stake and exactly
one of four things happens to any given validator: rewarded, untouched,
slashed, or slashed-and-defaulted.  Stake removed by slashing or default
is burned.  The closed forms for ruin probability, the terminal-stake
mixture law and the dispersion index serve as analytic oracles for the
Monte Carlo engines.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .core import (
    AggregationRule,
    PricingCurve,
    StakeState,
    ValidatorPricing,
    aggregate_prices,
    validator_price,
)
from .errors import ParameterError, StakesimError

#: Exponent convention for the terminal-stake growth factor.  "martingale"
#: uses the branching-process normalizer R*(1-p) - iota*p; "drift" uses
#: R - (1+iota)*p.  The two agree at R = 1.
EXPONENT_FORMS = ("martingale", "drift")


class EventOutcome(Enum):
    REWARDED = 1            # selected and not slashed: stake += R_h
    UNCHANGED = 2           # not selected, not slashed
    SLASHED = 3             # slashed, stays above the default boundary
    DEFAULTED = 4           # slashed through the boundary: stake wiped


@dataclass(frozen=True)
class SlashParams:
    """Per-validator slash probabilities and the global slash fraction."""

    p: tuple[float, ...]
    iota: float

    def __post_init__(self) -> None:
        if any(not (0.0 <= pi <= 1.0) for pi in self.p):
            raise ParameterError("slash probabilities must lie in [0, 1]")
        if not (0.0 < self.iota < 1.0):
            raise ParameterError(f"slash fraction must lie in (0, 1), got {self.iota}")


@dataclass(frozen=True)
class ReplacementDraw:
    """One realized stake increment for one validator."""

    validator: int
    delta: float
    outcome: EventOutcome


def event_probabilities(
    stakes: StakeState,
    params: SlashParams,
    vp: Optional[ValidatorPricing],
    i: int,
    h: int = 0,
) -> tuple[float, float, float, float]:
    """Probabilities of the four outcomes for validator i at height h.

    The default indicator fires when the validator has an open loan and a
    slash would push stake below the collateral boundary.  The quadruple
    sums to 1.
    """
    total = stakes.total_stake
    if total <= 0:
        raise ParameterError("event probabilities undefined for zero total stake")
    pi_hat = stakes.stakes[i] / total
    p_i = params.p[i]
    post_slash = (1.0 - params.iota) * stakes.stakes[i]
    defaults = bool(vp is not None and vp.debt > 0 and post_slash < vp.threshold)
    return (
        (1.0 - p_i) * pi_hat,
        (1.0 - p_i) * (1.0 - pi_hat),
        p_i * (0.0 if defaults else 1.0),
        p_i * (1.0 if defaults else 0.0),
    )


def apply_replacement(stakes: StakeState, draw: ReplacementDraw) -> StakeState:
    """Apply one replacement draw; negative deltas are burned."""
    current = stakes.stakes[draw.validator]
    new_stake = current + draw.delta
    if new_stake < -1e-12 * max(current, 1.0):
        raise StakesimError(
            f"replacement would drive validator {draw.validator} stake negative "
            f"({current} + {draw.delta})"
        )
    new_stake = max(new_stake, 0.0)
    burn = -draw.delta if draw.delta < 0 else 0.0
    return stakes.replace_stake(draw.validator, new_stake, burn_delta=burn)


def adversarial_replacement_matrix(reward: float, n: int = 2) -> np.ndarray:
    """Selfish-mining replacement matrix: row 0 is the adversary.

    Only used by tests; the simulators draw measure-valued rows instead.
    """
    if n != 2:
        raise ParameterError("the selfish-mining construction is a 2-color urn")
    return reward * np.array([[2.0, -1.0], [0.0, 1.0]])


def ruin_probability(p_i: float) -> float:
    """Probability a validator's stake is eventually absorbed at zero.

    Equals p/(1-p) below one half and saturates at 1 from p = 1/2 on.
    """
    if not (0.0 <= p_i <= 1.0):
        raise ParameterError(f"slash probability must lie in [0, 1], got {p_i}")
    if p_i >= 0.5:
        return 1.0
    return p_i / (1.0 - p_i)


def survivor_scale(p_i: float) -> float:
    """Mean of the exponential branch of the terminal-stake law."""
    if not (0.0 <= p_i < 0.5):
        raise ParameterError(f"survivor scale requires p in [0, 0.5), got {p_i}")
    return (1.0 - p_i) / (1.0 - 2.0 * p_i)


def growth_exponent(p_i: float, reward: float, iota: float, form: str = "martingale") -> float:
    """Per-block exponential growth rate of a surviving validator's stake."""
    if form == "martingale":
        return reward * (1.0 - p_i) - iota * p_i
    if form == "drift":
        return reward - (1.0 + iota) * p_i
    raise ParameterError(f"unknown exponent form {form!r}; expected one of {EXPONENT_FORMS}")


def sample_terminal_stakes(
    rng: np.random.Generator,
    p_i: float,
    reward: float = 1.0,
    iota: float = 0.05,
    h: int = 0,
    size: int = 1,
    form: str = "martingale",
) -> np.ndarray:
    """Draw terminal stakes: exp(alpha*h) times a zero-inflated exponential.

    The mixing weight on the zero atom is the ruin probability and the
    exponential branch has mean ``survivor_scale(p_i)``.
    """
    if not (0.0 <= p_i < 0.5):
        raise ParameterError(f"terminal-stake sampler requires p < 0.5, got {p_i}")
    gamma = ruin_probability(p_i)
    beta = survivor_scale(p_i)
    x = rng.exponential(scale=beta, size=size)
    if gamma > 0:
        x[rng.random(size) < gamma] = 0.0
    alpha = growth_exponent(p_i, reward, iota, form)
    return x * math.exp(alpha * h)


def sample_terminal_stake(
    rng: np.random.Generator,
    p_i: float,
    reward: float = 1.0,
    iota: float = 0.05,
    h: int = 0,
    form: str = "martingale",
) -> float:
    return float(sample_terminal_stakes(rng, p_i, reward, iota, h, size=1, form=form)[0])


def dispersion_index(p: float, gamma: Optional[float] = None, beta: Optional[float] = None) -> float:
    """Expected L2/L1 concentration index beta * (1 + (1 - gamma)^2).

    gamma and beta default to the values implied by p.  Note this is the
    printed closed form; the mixture law's own moments give
    E[X] = (1-gamma)*beta and E[X^2] = 2*(1-gamma)*beta^2, which the
    sampler tests check separately.
    """
    if gamma is None:
        gamma = ruin_probability(p)
    if beta is None:
        beta = survivor_scale(p)
    if not (0.0 <= gamma <= 1.0) or beta <= 0:
        raise ParameterError("gamma must lie in [0,1] and beta must be positive")
    return beta * (1.0 + (1.0 - gamma) ** 2)


def mixture_moments(p: float) -> tuple[float, float]:
    """(E[X], E[X^2]) of the unscaled terminal-stake mixture."""
    gamma = ruin_probability(p)
    beta = survivor_scale(p)
    return (1.0 - gamma) * beta, 2.0 * (1.0 - gamma) * beta * beta


def fixed_point_visits(
    curve: PricingCurve,
    stakes: StakeState,
    params: SlashParams,
    horizon: int,
    epsilon: float,
    rng: np.random.Generator,
    *,
    reward: float = 1.0,
    borrow: bool = True,
    rule: Optional[AggregationRule] = None,
    fixed_point: float = 1.0,
) -> int:
    """Count blocks whose aggregate price lands within epsilon of the fixed point.

    Exploratory: simulates the selected-producer urn with maximal per-block
    borrowing against the previous block's stake and reports how often the
    aggregate price recurs to the fixed point.  Never asserted as pass/fail.
    """
    if horizon < 0 or epsilon < 0:
        raise ParameterError("horizon and epsilon must be non-negative")
    rule = rule or AggregationRule()
    pi = np.asarray(stakes.stakes, dtype=float)
    n = pi.size
    # mid-range collateral keeps the default boundary away from the fixed point
    c = 0.5
    visits = 0
    for _ in range(horizon):
        total = pi.sum()
        if total <= 0:
            break
        snapshot = pi.copy()
        winner = int(np.searchsorted(np.cumsum(pi), rng.random() * total, side="right"))
        winner = min(winner, n - 1)
        if rng.random() < params.p[winner]:
            loss = params.iota * pi[winner]
            post = pi[winner] - loss
            if borrow and post < c * snapshot[winner]:
                pi[winner] = 0.0
            else:
                pi[winner] = post
        else:
            pi[winner] += reward
        if borrow:
            prices = [
                validator_price(ValidatorPricing(c=c, stake_at_issue=s, debt=c * s), curve, x)
                if s > 0
                else 1.0
                for s, x in zip(snapshot, pi)
            ]
        else:
            prices = [1.0] * n
        agg = aggregate_prices(rule, prices)
        if abs(agg - fixed_point) <= epsilon:
            visits += 1
    return visits
