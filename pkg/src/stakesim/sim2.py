"""Two-component agent simulation: staked tokens plus derivative borrowing.

Each block: at epoch boundaries outstanding loans are repaid and fresh ones
drawn, loans are marked against the epoch-start stake snapshot, positions
priced beyond phi_max are liquidated (stake burned, borrower retired), then
slashes and the block reward are applied.  Everything is driven by one
Philox stream per trajectory, so runs are reproducible regardless of
threading.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .core import DEFAULT_PRICE, MonetaryPolicy, PowerLaw, block_reward
from .errors import ConfigError, NumericError
from .metrics import gini, norm_ratio
from .rng import stream

SLASH_MODES = ("independent", "selected")
#: "epoch" re-marks every open loan against the epoch-start stake; "issuance"
#: freezes each borrower's basis at their own borrow events, so the default
#: boundary tracks the loan rather than the epoch.
SNAPSHOT_MODES = ("epoch", "issuance")


@dataclass(frozen=True)
class Sim2Config:
    n: int = 100
    h_max: int = 20_000
    eta: int = 10
    lambda_stake: float = 1.0
    lambda_collateral: float = 20.0
    lambda_borrow: float = 0.5
    lambda_slash: float = 0.5
    iota: float = 0.05
    monetary: MonetaryPolicy = field(default_factory=MonetaryPolicy)
    k: float = 1.0
    phi_max: float = 1.0e6
    seed: int = 0
    trajectories: int = 20
    sample_stride: int = 100
    slash_mode: str = "independent"
    # loans persist across epochs and are marked against the stake held at
    # their own issuance; loan_reset=True + snapshot_mode="epoch" instead
    # repays every epoch and re-marks against the epoch-start stake
    loan_reset: bool = False
    snapshot_mode: str = "issuance"

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ConfigError(f"need at least 2 validators, got {self.n}")
        if self.eta < 1 or self.h_max < self.eta:
            raise ConfigError("need eta >= 1 and h_max >= eta")
        if not (0.0 < self.iota < 1.0):
            raise ConfigError(f"slash fraction must lie in (0, 1), got {self.iota}")
        for name in ("lambda_stake", "lambda_collateral", "lambda_borrow", "lambda_slash"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        if self.k < 0 or not self.phi_max > 1:
            raise ConfigError("need k >= 0 and phi_max > 1")
        if self.sample_stride < 1 or self.trajectories < 1:
            raise ConfigError("sample_stride and trajectories must be >= 1")
        if self.slash_mode not in SLASH_MODES:
            raise ConfigError(f"slash_mode must be one of {SLASH_MODES}")
        if self.snapshot_mode not in SNAPSHOT_MODES:
            raise ConfigError(f"snapshot_mode must be one of {SNAPSHOT_MODES}")

    @property
    def curve(self) -> PowerLaw:
        return PowerLaw(self.k)


@dataclass
class Sim2State:
    """Mutable per-trajectory state; owned by a single trajectory."""

    stakes: np.ndarray
    loans: np.ndarray
    snapshot: np.ndarray
    collateral: np.ndarray
    borrow_prob: np.ndarray
    slash_prob: np.ndarray
    defaulted: np.ndarray
    supply0: float
    minted: float = 0.0
    burned: float = 0.0
    forfeited: float = 0.0
    height: int = 0
    extinct: bool = False

    @property
    def n(self) -> int:
        return self.stakes.shape[0]

    @property
    def max_possible_supply(self) -> float:
        return self.supply0 + self.minted

    @property
    def removed(self) -> float:
        """Tokens destroyed or withheld: burned stake plus forfeited rewards."""
        return self.burned + self.forfeited


def init_state(config: Sim2Config, rng: np.random.Generator) -> Sim2State:
    """Sample the validator population and the initial stake distribution."""
    stakes = np.ceil(rng.exponential(scale=1.0 / config.lambda_stake, size=config.n))
    collateral = rng.beta(config.lambda_collateral, 1.0, size=config.n)
    borrow_prob = rng.beta(config.lambda_borrow, 1.0, size=config.n)
    slash_prob = rng.beta(config.lambda_slash, 1.0, size=config.n)
    return Sim2State(
        stakes=stakes,
        loans=np.zeros(config.n),
        snapshot=stakes.copy(),
        collateral=collateral,
        borrow_prob=borrow_prob,
        slash_prob=slash_prob,
        defaulted=np.zeros(config.n, dtype=bool),
        supply0=float(stakes.sum()),
    )


def update_borrowers(state: Sim2State, config: Sim2Config, rng: np.random.Generator) -> np.ndarray:
    """Epoch-boundary borrowing: each willing validator takes a uniform
    fraction of their remaining collateral headroom.  Returns the mask of
    validators whose loan was created or topped up."""
    wants = rng.random(state.n) < state.borrow_prob
    xi = rng.random(state.n)
    can = wants & (state.stakes > 0) & (state.loans < state.collateral * state.stakes)
    if can.any():
        pi = state.stakes[can]
        headroom = state.collateral[can] - state.loans[can] / pi
        state.loans[can] = state.loans[can] + xi[can] * headroom * pi
    return can


def _prices_against_snapshot(
    stakes: np.ndarray,
    snapshot: np.ndarray,
    collateral: np.ndarray,
    loans: np.ndarray,
    k: float,
) -> np.ndarray:
    """Per-validator redemption prices; 1 wherever no loan is open."""
    prices = np.ones_like(stakes)
    open_loan = loans > 0
    if not open_loan.any():
        return prices
    thresh = collateral[open_loan] * snapshot[open_loan]
    gap = snapshot[open_loan] - thresh
    # a basis so small that (1-c)*snapshot underflows is a dust position;
    # treat it as defaulted rather than dividing by zero
    degenerate = gap <= 0.0
    u = np.divide(stakes[open_loan] - thresh, gap, out=np.zeros_like(gap), where=~degenerate)
    p = np.ones_like(u)
    p[(u <= 0.0) | degenerate] = DEFAULT_PRICE
    inner = (u > 0.0) & (u < 1.0) & ~degenerate
    if k > 0:
        p[inner] = u[inner] ** -k
    prices[open_loan] = p
    return prices


def mark_loans(state: Sim2State, config: Sim2Config) -> np.ndarray:
    """Mark open loans against the epoch-start snapshot."""
    return _prices_against_snapshot(
        state.stakes, state.snapshot, state.collateral, state.loans, config.k
    )


def clear_defaulted_loans(state: Sim2State, prices: np.ndarray, config: Sim2Config) -> Sim2State:
    """Liquidate positions priced beyond phi_max: burn stake, retire borrower."""
    hit = prices > config.phi_max
    if hit.any():
        state.burned += float(state.stakes[hit].sum())
        state.stakes[hit] = 0.0
        state.loans[hit] = 0.0
        state.borrow_prob[hit] = 0.0
        state.defaulted[hit] = True
    return state


def update_stake_distribution(
    state: Sim2State, config: Sim2Config, rng: np.random.Generator
) -> Sim2State:
    """Slash draws plus proportional winner selection for one block."""
    reward = block_reward(config.monetary, state.height)
    state.minted += reward
    total = float(state.stakes.sum())
    if total <= 0.0:
        state.extinct = True
        state.forfeited += reward
        return state
    pick = rng.random() * total
    winner = int(np.searchsorted(np.cumsum(state.stakes), pick, side="right"))
    winner = min(winner, state.n - 1)
    if config.slash_mode == "independent":
        slashed = rng.random(state.n) < state.slash_prob
        losses = np.where(slashed, config.iota * state.stakes, 0.0)
        state.stakes -= losses
        state.burned += float(losses.sum())
        winner_slashed = bool(slashed[winner])
    else:
        winner_slashed = rng.random() < state.slash_prob[winner]
        if winner_slashed:
            loss = config.iota * state.stakes[winner]
            state.stakes[winner] -= loss
            state.burned += loss
    if winner_slashed:
        state.forfeited += reward
    else:
        state.stakes[winner] += reward
    return state


@dataclass
class TrajectoryRecord:
    """Sampled metric rows of one trajectory (weights filled by sim3 only)."""

    heights: np.ndarray
    gini: np.ndarray
    norm_ratio: np.ndarray
    supply_ratio: np.ndarray
    frac_defaulted: np.ndarray
    alive: np.ndarray
    weights: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return len(self.heights)

    def metric(self, name: str) -> np.ndarray:
        if name in ("w_s", "w_d", "w_l"):
            if self.weights is None:
                raise KeyError(name)
            return self.weights[:, ("w_s", "w_d", "w_l").index(name)]
        return getattr(self, name)


def _sample(state: Sim2State, heights, ginis, ratios, supply, fracs, alive) -> None:
    heights.append(state.height)
    ginis.append(gini(state.stakes))
    ratios.append(norm_ratio(state.stakes))
    supply.append(float(state.stakes.sum()) / state.max_possible_supply)
    fracs.append(float(state.defaulted.mean()))
    alive.append(int((state.stakes > 0).sum()))


def check_supply_identity(state: Sim2State, rel_tol: float = 1e-9) -> bool:
    """Conservation: stakes + burned + forfeited == initial supply + emission."""
    lhs = float(state.stakes.sum()) + state.removed
    rhs = state.supply0 + state.minted
    return math.isclose(lhs, rhs, rel_tol=rel_tol, abs_tol=rel_tol)


def run_trajectory2(
    config: Sim2Config, trajectory: int = 0, cell: tuple[int, int] = (0, 0)
) -> TrajectoryRecord:
    """Simulate one trajectory; deterministic in (seed, cell, trajectory)."""
    rng = stream(config.seed, cell[0], cell[1], trajectory)
    state = init_state(config, rng)
    heights: list[int] = []
    ginis: list[float] = []
    ratios: list[float] = []
    supply: list[float] = []
    fracs: list[float] = []
    alive: list[int] = []
    for h in range(config.h_max):
        state.height = h
        if not state.extinct:
            if h % config.eta == 0:
                if config.loan_reset:
                    nd = ~state.defaulted
                    state.loans[nd] = 0.0
                borrowed = update_borrowers(state, config, rng)
                if config.snapshot_mode == "epoch":
                    state.snapshot = state.stakes.copy()
                else:
                    state.snapshot[borrowed] = state.stakes[borrowed]
            prices = mark_loans(state, config)
            clear_defaulted_loans(state, prices, config)
            update_stake_distribution(state, config, rng)
        else:
            state.minted += block_reward(config.monetary, h)
            state.forfeited += block_reward(config.monetary, h)
        if h % config.sample_stride == 0:
            _sample(state, heights, ginis, ratios, supply, fracs, alive)
    if not check_supply_identity(state):
        raise NumericError(
            f"supply accounting drifted beyond tolerance at h={state.height}"
        )
    return TrajectoryRecord(
        heights=np.asarray(heights),
        gini=np.asarray(ginis),
        norm_ratio=np.asarray(ratios),
        supply_ratio=np.asarray(supply),
        frac_defaulted=np.asarray(fracs),
        alive=np.asarray(alive),
    )
