"""Pricing curves, per-validator calibration, aggregation and monetary policy.

The redemption price of the synthetic asset is a decreasing "mother" curve
evaluated on a normalized stake argument.  Each validator gets an affine
recalibration of that curve pinned to two boundary conditions: price 1 at
the stake held when the loan was issued, and an infinite price (default)
once stake falls below the collateral fraction of that snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DomainError, NumericError, ParameterError

#: Sentinel price for a defaulted position.  Arithmetic on it is forbidden
#: except clamping inside aggregation.
DEFAULT_PRICE = math.inf

#: Prices above this are treated as defaulted unless configured otherwise.
PHI_MAX_DEFAULT = 1.0e6


def is_default_price(price: float) -> bool:
    """True when a price is the default sentinel."""
    return math.isinf(price) and price > 0


@dataclass(frozen=True)
class PowerLaw:
    """Mother curve ``max(u**-k, 1)``: flat at 1 above u=1, blowing up at 0."""

    k: float

    def __post_init__(self) -> None:
        if not (self.k >= 0 and math.isfinite(self.k)):
            raise ParameterError(f"power-law exponent must be finite and >= 0, got {self.k}")

    def value(self, u: float) -> float:
        if u < 0:
            raise DomainError(f"curve argument must be non-negative, got {u}")
        if u == 0.0:
            return DEFAULT_PRICE
        if u >= 1.0 or self.k == 0.0:
            return 1.0
        return u ** -self.k

    def value_many(self, u: np.ndarray) -> np.ndarray:
        """Vectorized ``value`` for non-negative inputs."""
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise DomainError("curve argument must be non-negative")
        out = np.ones_like(u)
        inner = (u > 0) & (u < 1.0)
        if self.k > 0:
            out[inner] = u[inner] ** -self.k
            out[u == 0.0] = DEFAULT_PRICE
        return out


@dataclass(frozen=True)
class TableDriven:
    """Mother curve given by strictly decreasing sample points.

    Linear interpolation between knots; +inf left of the table (default
    region), clamped to the last value on the right.  The table must pass
    through (1, 1) so the issuance boundary condition holds.
    """

    us: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self) -> None:
        us = np.asarray(self.us, dtype=float)
        vals = np.asarray(self.values, dtype=float)
        if us.ndim != 1 or us.shape != vals.shape or us.size < 2:
            raise ParameterError("table needs matching 1-d u/value arrays with >= 2 points")
        if np.any(us < 0) or not np.all(np.isfinite(us)) or not np.all(np.isfinite(vals)):
            raise ParameterError("table knots must be finite with u >= 0")
        if not np.all(np.diff(us) > 0):
            raise ParameterError("table u-knots must be strictly increasing")
        if not np.all(np.diff(vals) < 0):
            raise ParameterError("table values must be strictly decreasing")
        if np.any(vals <= 0):
            raise ParameterError("table values must be positive")
        if not (us[0] <= 1.0 <= us[-1]):
            raise ParameterError("table must bracket u = 1")
        at_one = float(np.interp(1.0, us, vals))
        if abs(at_one - 1.0) > 1e-6:
            raise ParameterError(f"table must interpolate to 1 at u = 1, got {at_one}")

    def value(self, u: float) -> float:
        if u < 0:
            raise DomainError(f"curve argument must be non-negative, got {u}")
        us = self.us
        if u < us[0]:
            return DEFAULT_PRICE
        if u >= us[-1]:
            return float(self.values[-1])
        return float(np.interp(u, us, self.values))

    def value_many(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        if np.any(u < 0):
            raise DomainError("curve argument must be non-negative")
        out = np.interp(u, self.us, self.values)
        out[u < self.us[0]] = DEFAULT_PRICE
        return out


PricingCurve = PowerLaw | TableDriven


def eval_mother(curve: PricingCurve, u: float) -> float:
    """Evaluate the mother curve at normalized stake ``u >= 0``.

    Returns the default sentinel at u = 0; non-increasing in u; equals 1
    at u = 1 and everywhere above.
    """
    return curve.value(u)


def calibrate_affine(c: float, stake_at_issue: float) -> tuple[float, float]:
    """Affine coefficients (a, b) mapping raw stake to the curve argument.

    Solves a*stake_at_issue + b = 1 and a*(c*stake_at_issue) + b = 0, i.e.
    argument 1 at the issuance stake and 0 at the default boundary.
    """
    if not (0.0 < c < 1.0):
        raise ParameterError(f"collateral factor must lie in (0, 1), got {c}")
    if not (stake_at_issue > 0 and math.isfinite(stake_at_issue)):
        raise ParameterError(f"stake_at_issue must be positive, got {stake_at_issue}")
    threshold = c * stake_at_issue
    gap = stake_at_issue - threshold
    return 1.0 / gap, -threshold / gap


@dataclass(frozen=True)
class ValidatorPricing:
    """One validator's calibrated pricing data for a single open loan.

    ``threshold`` and ``gap`` cache c*stake and stake - c*stake so the
    affine argument (s - threshold)/gap hits exactly 1.0 and 0.0 at the
    two boundary stakes in floating point.
    """

    c: float
    stake_at_issue: float
    debt: float = 0.0
    threshold: float = field(init=False)
    gap: float = field(init=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.c < 1.0):
            raise ParameterError(f"collateral factor must lie in (0, 1), got {self.c}")
        if not (self.stake_at_issue > 0 and math.isfinite(self.stake_at_issue)):
            raise ParameterError("stake_at_issue must be positive and finite")
        if self.debt < 0:
            raise ParameterError("debt must be non-negative")
        object.__setattr__(self, "threshold", self.c * self.stake_at_issue)
        object.__setattr__(self, "gap", self.stake_at_issue - self.threshold)

    @property
    def a(self) -> float:
        return 1.0 / self.gap

    @property
    def b(self) -> float:
        return -self.threshold / self.gap

    def affine_argument(self, current_stake: float) -> float:
        if current_stake < 0:
            raise DomainError("stake must be non-negative")
        return (current_stake - self.threshold) / self.gap


def validator_price(vp: ValidatorPricing, curve: PricingCurve, current_stake: float) -> float:
    """Redemption price for one validator at their current stake.

    Exactly 1 at (or above) the issuance stake, the default sentinel at or
    below c*issuance, and the mother curve on the affine argument between.
    """
    if current_stake < 0:
        raise DomainError("stake must be non-negative")
    if current_stake >= vp.stake_at_issue:
        return 1.0
    if current_stake <= vp.threshold:
        return DEFAULT_PRICE
    return curve.value(vp.affine_argument(current_stake))


class AggregationKind(Enum):
    BOUNDED_MEAN = "bounded_mean"
    MEDIAN = "median"


@dataclass(frozen=True)
class AggregationRule:
    """How per-validator prices fold into the fungible asset's price."""

    kind: AggregationKind = AggregationKind.BOUNDED_MEAN
    phi_max: float = PHI_MAX_DEFAULT
    # clamp=True caps each price at phi_max (the useful reading of a
    # "bounded" mean); clamp=False floors prices at phi_max instead, for
    # anyone wanting the literal lattice-max convention.
    clamp: bool = True

    def __post_init__(self) -> None:
        if self.kind is AggregationKind.BOUNDED_MEAN and not self.phi_max > 0:
            raise ParameterError("phi_max must be positive")


def aggregate_prices(rule: AggregationRule, prices: Sequence[float]) -> float:
    """Aggregate per-validator prices; sentinels clamp to phi_max."""
    if len(prices) == 0:
        raise ParameterError("cannot aggregate an empty price vector")
    arr = np.asarray(prices, dtype=float)
    if np.any(arr < 0) or np.any(np.isnan(arr)):
        raise ParameterError("prices must be non-negative and not NaN")
    if rule.kind is AggregationKind.MEDIAN:
        ordered = np.sort(arr)
        return float(ordered[(len(ordered) - 1) // 2])
    if rule.clamp:
        return float(np.minimum(arr, rule.phi_max).mean())
    return float(np.maximum(arr, rule.phi_max).mean())


@dataclass(frozen=True)
class MonetaryPolicy:
    """Geometric block reward schedule R_h = r0 * lam**h."""

    r0: float = 1.0
    lam: float = 1.0

    def __post_init__(self) -> None:
        if not (self.r0 > 0 and math.isfinite(self.r0)):
            raise ParameterError(f"base reward must be positive, got {self.r0}")
        if not (self.lam > 0 and math.isfinite(self.lam)):
            raise ParameterError(f"policy parameter must be positive, got {self.lam}")

    @property
    def kind(self) -> str:
        if self.lam < 1.0:
            return "deflationary"
        if self.lam == 1.0:
            return "constant"
        return "inflationary"


def _overflow(policy: MonetaryPolicy, h: int) -> NumericError:
    return NumericError(
        f"reward schedule overflows float64 at h={h} (r0={policy.r0}, lambda={policy.lam})"
    )


def block_reward(policy: MonetaryPolicy, h: int) -> float:
    """Reward emitted at block height h >= 0."""
    if h < 0:
        raise ParameterError("height must be non-negative")
    try:
        r = policy.r0 * policy.lam**h
    except OverflowError:
        raise _overflow(policy, h) from None
    if not math.isfinite(r):
        raise _overflow(policy, h)
    return r


def max_supply(policy: MonetaryPolicy, h: int) -> float:
    """Cumulative emission through block h: r0 * (1 + lam + ... + lam**h)."""
    if h < 0:
        raise ParameterError("height must be non-negative")
    try:
        if policy.lam == 1.0:
            s = policy.r0 * (h + 1)
        else:
            s = policy.r0 * (1.0 - policy.lam ** (h + 1)) / (1.0 - policy.lam)
    except OverflowError:
        raise _overflow(policy, h) from None
    if not math.isfinite(s):
        raise _overflow(policy, h)
    return s


@dataclass(frozen=True)
class StakeState:
    """Immutable snapshot of stakes, loans, lent balances and burn accounting."""

    stakes: tuple[float, ...]
    loans: tuple[float, ...] = ()
    lent: tuple[float, ...] = ()
    max_supply: float = math.inf
    burned: float = 0.0
    height: int = 0

    def __post_init__(self) -> None:
        n = len(self.stakes)
        loans = self.loans if self.loans else tuple(0.0 for _ in range(n))
        lent = self.lent if self.lent else tuple(0.0 for _ in range(n))
        object.__setattr__(self, "loans", loans)
        object.__setattr__(self, "lent", lent)
        if len(loans) != n or len(lent) != n:
            raise ParameterError("stakes, loans and lent must have equal length")
        if any(x < 0 for x in self.stakes + loans + lent) or self.burned < 0:
            raise ParameterError("balances must be non-negative")
        if self.height < 0:
            raise ParameterError("height must be non-negative")
        total = sum(self.stakes) + sum(lent) + self.burned
        if math.isfinite(self.max_supply) and total > self.max_supply * (1 + 1e-9):
            raise ParameterError(
                f"accounting violated: stakes+lent+burned = {total} exceeds max supply {self.max_supply}"
            )

    @property
    def n(self) -> int:
        return len(self.stakes)

    @property
    def total_stake(self) -> float:
        return sum(self.stakes)

    def normalized(self) -> tuple[float, ...]:
        total = self.total_stake
        if total <= 0:
            raise ParameterError("cannot normalize a zero-stake state")
        return tuple(s / total for s in self.stakes)

    def replace_stake(self, i: int, new_stake: float, burn_delta: float = 0.0) -> "StakeState":
        stakes = list(self.stakes)
        stakes[i] = new_stake
        return StakeState(
            stakes=tuple(stakes),
            loans=self.loans,
            lent=self.lent,
            max_supply=self.max_supply,
            burned=self.burned + burn_delta,
            height=self.height,
        )
