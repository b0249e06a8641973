"""Three-component agent simulation: stake, derivative borrowing, lending.

Epochs alternate a portfolio phase (repay loans, refresh the volatility
state, solve each agent's mean-variance problem, rebalance balances) with a
block phase running the same slash/reward/liquidation kernel as the
two-component model.  Setting ``components = 2`` drops the lending leg and
reproduces the stake/derivative-only model.

Balance conventions: an issued derivative is carved out of the staked
balance (it no longer carries consensus weight), but loans are marked
against the full collateral position stakes + loans, so liquidation is
triggered by slash-driven decline rather than by the act of borrowing.
Repayment at the epoch boundary restores the carved stake.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import block_reward
from .errors import ConfigError, NumericError
from .metrics import gini, norm_ratio
from .portfolio import (
    CIRParams,
    LendingMarket,
    cir_step_many,
    compute_borrow_rate,
    solve_markowitz_batch,
)
from .rng import stream
from .sim2 import (
    Sim2Config,
    Sim2State,
    TrajectoryRecord,
    _prices_against_snapshot,
    init_state,
    update_stake_distribution,
)

DURATION_CONVENTIONS = ("issuance_ratio", "stake_share")


@dataclass(frozen=True)
class Sim3Config(Sim2Config):
    cir: CIRParams = field(default_factory=CIRParams)
    lending: LendingMarket = field(default_factory=LendingMarket)
    demand: float = 50.0
    lambda_risk_dof: int = 0
    components: int = 3
    duration_at: str = "issuance_ratio"
    supply_includes_lent: bool = False

    def __post_init__(self) -> None:
        super().__post_init__()
        if self.components not in (2, 3):
            raise ConfigError("components must be 2 or 3")
        if self.duration_at not in DURATION_CONVENTIONS:
            raise ConfigError(f"duration_at must be one of {DURATION_CONVENTIONS}")
        if self.demand < 0:
            raise ConfigError("lending demand must be non-negative")
        if self.lambda_risk_dof < 0:
            raise ConfigError("lambda_risk_dof must be non-negative (0 = use n)")

    @property
    def risk_dof(self) -> int:
        return self.lambda_risk_dof or self.n


@dataclass
class Sim3State(Sim2State):
    lent: np.ndarray = None  # type: ignore[assignment]
    lambda_risk: np.ndarray = None  # type: ignore[assignment]
    v_lend: np.ndarray = None  # type: ignore[assignment]
    v_scale: np.ndarray = None  # type: ignore[assignment]
    weights: np.ndarray = None  # type: ignore[assignment]
    prev_u: np.ndarray = None  # type: ignore[assignment]
    had_loan: np.ndarray = None  # type: ignore[assignment]
    clip_count: int = 0

    @property
    def wealth(self) -> np.ndarray:
        return self.stakes + self.lent

    @property
    def position(self) -> np.ndarray:
        """Full collateral position backing open loans."""
        return self.stakes + self.loans


def init_state3(config: Sim3Config, rng: np.random.Generator) -> Sim3State:
    base = init_state(config, rng)
    n = config.n
    return Sim3State(
        stakes=base.stakes,
        loans=base.loans,
        snapshot=base.snapshot,
        collateral=base.collateral,
        borrow_prob=base.borrow_prob,
        slash_prob=base.slash_prob,
        defaulted=base.defaulted,
        supply0=base.supply0,
        lent=np.zeros(n),
        lambda_risk=rng.chisquare(config.risk_dof, size=n),
        v_lend=np.full(n, config.cir.v0),
        v_scale=np.full(n, config.cir.v0),
        weights=np.zeros((n, 3)),
        prev_u=np.ones(n),
        had_loan=np.zeros(n, dtype=bool),
    )


def _duration_point(state: Sim3State, config: Sim3Config) -> np.ndarray:
    """Where on the curve each agent's risk is evaluated."""
    if config.duration_at == "stake_share":
        total = float(state.stakes.sum())
        share = state.stakes / total if total > 0 else np.zeros(state.n)
        return np.clip(share, 1e-12, None)
    basis = np.where(state.snapshot > 0, state.snapshot, 1.0)
    u = state.position / basis
    return np.clip(u, 1e-12, None)


def _curve_value(config: Sim3Config, u: np.ndarray) -> np.ndarray:
    out = np.ones_like(u)
    inner = u < 1.0
    if config.k > 0:
        out[inner] = u[inner] ** -config.k
    return out


def epoch_returns_and_covariances(
    state: Sim3State, config: Sim3Config, gamma_t: float
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized per-agent (mu, Sigma) plus the curve point used.

    mu = (stake share, marked derivative return, lending rate); the
    stake/derivative block of Sigma is the rank-one [[1, d], [d, d^2]]
    with d the curve's log-slope at the agent's point, the lending
    variance comes from the agent's own CIR state, and the whole matrix
    is scaled by a second, independent CIR draw.
    """
    n = state.n
    dim = config.components
    total = float(state.stakes.sum())
    alive = state.stakes > 0
    u = _duration_point(state, config)
    delta = np.where(alive, config.k / u, 0.0)
    mu = np.zeros((n, dim))
    if total > 0:
        mu[:, 0] = np.where(alive, state.stakes / total, 0.0)
    ratio = _curve_value(config, u) / _curve_value(config, state.prev_u)
    mu[:, 1] = np.where(alive & state.had_loan, ratio - 1.0, 0.0)
    sigma = np.zeros((n, dim, dim))
    sigma[:, 0, 0] = 1.0
    sigma[:, 0, 1] = delta
    sigma[:, 1, 0] = delta
    sigma[:, 1, 1] = delta**2
    if dim == 3:
        mu[:, 2] = gamma_t
        sigma[:, 2, 2] = state.v_lend
    sigma *= state.v_scale[:, None, None]
    return mu, sigma, u


def get_returns_and_covariance(
    state: Sim3State,
    config: Sim3Config,
    agent: int,
    gamma_t: float,
    rng: np.random.Generator,
) -> tuple[np.ndarray, np.ndarray]:
    """Single-agent contract: advances the agent's CIR states, then builds
    (mu, Sigma) exactly as the vectorized epoch path does."""
    z = rng.standard_normal(2)
    state.v_lend[agent] = cir_step_many(config.cir, state.v_lend[[agent]], z[:1])[0]
    state.v_scale[agent] = cir_step_many(config.cir, state.v_scale[[agent]], z[1:])[0]
    mu, sigma, _ = epoch_returns_and_covariances(state, config, gamma_t)
    return mu[agent], sigma[agent]


def update_markowitz(state: Sim3State, config: Sim3Config, gamma_t: float) -> np.ndarray:
    """Solve every alive agent's weight vector; dead agents get zeros and
    failed solves keep the agent's previous weights."""
    dim = config.components
    mu, sigma, u = epoch_returns_and_covariances(state, config, gamma_t)
    alive = state.stakes > 0
    weights = np.zeros((state.n, 3))
    if alive.any():
        w, _, ok = solve_markowitz_batch(mu[alive], sigma[alive], state.lambda_risk[alive])
        rows = np.nonzero(alive)[0]
        good = rows[ok]
        weights[good, :dim] = w[ok]
        stale = rows[~ok]
        weights[stale] = state.weights[stale]
    state.weights = weights
    state.prev_u = u
    return weights


def rebalance(state: Sim3State, weights: np.ndarray) -> Sim3State:
    """Apply the three conditional transfers, clipping at available balances.

    Transfers conserve per-agent wealth exactly; clipped moves bump
    ``clip_count``.  Negative targets act as "move fully out".
    """
    live = (state.stakes > 0) & ~state.defaulted
    wealth = state.wealth
    target_s = wealth * weights[:, 0]
    target_d = wealth * weights[:, 1]
    target_l = wealth * weights[:, 2]

    # cover the staking-side demand out of the lending balance
    need = np.where(live, target_s + target_d - state.stakes, 0.0)
    move = np.clip(need, 0.0, state.lent)
    state.clip_count += int(np.sum((need > 0) & (move < need)))
    state.lent -= move
    state.stakes += move

    # issue new derivatives, carving the borrowed amount out of stake
    issue_mask = live & (target_s < state.stakes) & (target_d < state.stakes)
    issue = np.where(issue_mask, np.clip(target_d, 0.0, state.stakes), 0.0)
    state.clip_count += int(np.sum(issue_mask & (target_d < 0)))
    state.loans = np.where(issue_mask, issue, state.loans)
    state.stakes -= issue

    # top up the lending balance from stake
    need = np.where(live, target_l - state.lent, 0.0)
    move = np.clip(need, 0.0, state.stakes)
    state.clip_count += int(np.sum((need > 0) & (move < need)))
    state.lent += move
    state.stakes -= move
    return state


def _mark_and_clear3(state: Sim3State, config: Sim3Config) -> None:
    prices = _prices_against_snapshot(
        state.position, state.snapshot, state.collateral, state.loans, config.k
    )
    hit = prices > config.phi_max
    if hit.any():
        state.burned += float(state.stakes[hit].sum() + state.loans[hit].sum())
        state.stakes[hit] = 0.0
        state.loans[hit] = 0.0
        state.defaulted[hit] = True


def check_supply_identity3(state: Sim3State, rel_tol: float = 1e-9) -> bool:
    lhs = float(state.stakes.sum() + state.loans.sum() + state.lent.sum()) + state.removed
    rhs = state.supply0 + state.minted
    return math.isclose(lhs, rhs, rel_tol=rel_tol, abs_tol=rel_tol)


def run_trajectory3(
    config: Sim3Config, trajectory: int = 0, cell: tuple[int, int] = (0, 0)
) -> TrajectoryRecord:
    """Simulate one trajectory; one record row per epoch."""
    rng = stream(config.seed, cell[0], cell[1], trajectory)
    state = init_state3(config, rng)
    n_epochs = config.h_max // config.eta
    heights, ginis, ratios, supply, fracs, alives = [], [], [], [], [], []
    mean_weights = np.zeros((n_epochs, 3))
    for t in range(n_epochs):
        h0 = t * config.eta
        if not state.extinct:
            market = LendingMarket(
                base_rate=config.lending.base_rate,
                slope=config.lending.slope,
                supplied=float(state.lent.sum()),
                demanded=config.demand,
            )
            gamma_t = compute_borrow_rate(market)
            # full repayment restores the carved-out stake
            state.had_loan = state.loans > 0
            state.stakes += state.loans
            state.loans[:] = 0.0
            state.v_lend = cir_step_many(config.cir, state.v_lend, rng.standard_normal(state.n))
            state.v_scale = cir_step_many(config.cir, state.v_scale, rng.standard_normal(state.n))
            weights = update_markowitz(state, config, gamma_t)
            rebalance(state, weights)
            state.snapshot = state.position.copy()
        for b in range(config.eta):
            state.height = h0 + b
            if state.extinct:
                reward = block_reward(config.monetary, state.height)
                state.minted += reward
                state.forfeited += reward
                continue
            _mark_and_clear3(state, config)
            update_stake_distribution(state, config, rng)
        alive = state.stakes > 0
        mean_weights[t] = state.weights[alive].mean(axis=0) if alive.any() else 0.0
        heights.append(h0 + config.eta - 1)
        ginis.append(gini(state.stakes))
        ratios.append(norm_ratio(state.stakes))
        numerator = float(state.stakes.sum())
        if config.supply_includes_lent:
            numerator += float(state.lent.sum())
        supply.append(numerator / state.max_possible_supply)
        fracs.append(float(state.defaulted.mean()))
        alives.append(int(alive.sum()))
    if not check_supply_identity3(state):
        raise NumericError("supply accounting drifted beyond tolerance in sim3")
    return TrajectoryRecord(
        heights=np.asarray(heights),
        gini=np.asarray(ginis),
        norm_ratio=np.asarray(ratios),
        supply_ratio=np.asarray(supply),
        frac_defaulted=np.asarray(fracs),
        alive=np.asarray(alives),
        weights=mean_weights,
    )
