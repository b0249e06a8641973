"""Returns model and mean-variance selection over staked/derivative/lent assets.

The derivative's risk enters through its factor duration D (log-sensitivity
of the redemption curve to the staking factor) and factor convexity C.  The
stake/derivative covariance block is the rank-one matrix
sigma_s^2 * [[1, D], [D, D^2]], so the equality-constrained Markowitz
problem is solved through the bordered KKT system; several quantities of
that system (the lending weight, the constraint-sensitivity norm, the
turnover bound) also have closed forms used as mutual oracles.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import PowerLaw, PricingCurve, TableDriven
from .errors import DomainError, NumericError, ParameterError

_RIDGE_SCALE = 1e-8
_COND_LIMIT = 1e12
_DURATION_SINGULARITY = 1e-6


@dataclass(frozen=True)
class ReturnsModel:
    """Single-agent, single-epoch return/risk inputs.

    ``mu_d`` may be left None, in which case the second-order estimate
    B + sigma_s2*C/2 is used wherever a derivative mean return is needed.
    """

    mu_s: float = 0.0
    mu_l: float = 0.0
    sigma_s2: float = 0.0
    sigma_l2: float = 0.0
    D: float = 0.0
    B: float = 0.0
    C: float = 0.0
    lambda_risk: float = 1.0
    mu_d: Optional[float] = None

    def __post_init__(self) -> None:
        if self.sigma_s2 < 0 or self.sigma_l2 < 0:
            raise ParameterError("variances must be non-negative")
        if not self.lambda_risk > 0:
            raise ParameterError("risk aversion must be positive")

    def derivative_mean(self) -> float:
        return self.mu_d if self.mu_d is not None else mean_derivative_return(self)


def duration(curve: PricingCurve, u: float, chain: float = 1.0) -> float:
    """Factor duration -phi'(u)/phi(u) at u, times the chain-rule factor.

    For the power law the decreasing branch u**-k is differentiated for
    all u > 0, so duration stays k/u across the kink at 1: risk is always
    measured against the downside branch.
    """
    if isinstance(curve, PowerLaw):
        if u <= 0:
            raise DomainError("duration undefined at the default boundary u <= 0")
        return chain * curve.k / u
    return _fd_duration(curve, u, chain)


def convexity(curve: PricingCurve, u: float, chain: float = 1.0) -> float:
    """Factor convexity phi''(u)/phi(u) at u, times the squared chain factor."""
    if isinstance(curve, PowerLaw):
        if u <= 0:
            raise DomainError("convexity undefined at the default boundary u <= 0")
        return chain * chain * curve.k * (curve.k + 1.0) / (u * u)
    return _fd_convexity(curve, u, chain)


def _fd_duration(curve: TableDriven, u: float, chain: float, rel_step: float = 1e-6) -> float:
    h = rel_step * max(abs(u), 1e-3)
    if u - h <= curve.us[0]:
        raise DomainError("duration undefined at the table's default boundary")
    lo, hi = curve.value(u - h), curve.value(u + h)
    return chain * -(hi - lo) / (2.0 * h) / curve.value(u)


def _fd_convexity(curve: TableDriven, u: float, chain: float, rel_step: float = 1e-4) -> float:
    h = rel_step * max(abs(u), 1e-3)
    if u - h <= curve.us[0]:
        raise DomainError("convexity undefined at the table's default boundary")
    mid = curve.value(u)
    second = (curve.value(u + h) - 2.0 * mid + curve.value(u - h)) / (h * h)
    return chain * chain * second / mid


def mean_derivative_return(model: ReturnsModel) -> float:
    """Second-order mean return: base return plus the cost of convexity."""
    return model.B + 0.5 * model.sigma_s2 * model.C


def instantaneous_return(model: ReturnsModel) -> float:
    """B - D*mu_s + sigma_s2*C/2, the infinitesimal-period derivative return."""
    return model.B - model.D * model.mu_s + 0.5 * model.sigma_s2 * model.C


def _validate_psd(sigma: np.ndarray) -> None:
    eigmin = float(np.linalg.eigvalsh(sigma).min())
    if eigmin < -1e-10 * max(float(np.trace(sigma)), 1.0):
        raise ParameterError(f"covariance is not PSD (min eigenvalue {eigmin})")


def _bordered(mu: np.ndarray, sigma: np.ndarray, lam: float) -> tuple[np.ndarray, np.ndarray]:
    d = mu.shape[0]
    kkt = np.zeros((d + 1, d + 1))
    kkt[:d, :d] = lam * sigma
    kkt[:d, d] = 1.0
    kkt[d, :d] = 1.0
    rhs = np.append(mu, 1.0)
    return kkt, rhs


def solve_markowitz(
    mu: Sequence[float],
    sigma: np.ndarray,
    lambda_risk: float,
    *,
    nonnegative: bool = False,
) -> tuple[np.ndarray, float]:
    """Maximize w'mu - (lambda/2) w'Sigma w subject to sum(w) = 1.

    Solves the bordered KKT system directly; if it is singular or has
    condition number above 1e12, a ridge of 1e-8 * trace/dim is added to
    Sigma and the solve is repeated.  Returns (weights, multiplier).
    With ``nonnegative`` a simple active-set iteration clamps negative
    weights to zero.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    d = mu.shape[0]
    if d not in (2, 3) or sigma.shape != (d, d):
        raise ParameterError("expected 2 or 3 assets with a matching covariance")
    if not lambda_risk > 0:
        raise ParameterError("risk aversion must be positive")
    _validate_psd(sigma)
    w, nu = _kkt_solve(mu, sigma, lambda_risk)
    if not nonnegative:
        return w, nu
    free = np.ones(d, dtype=bool)
    for _ in range(d):
        if np.all(w[free] >= -1e-12):
            break
        free &= w >= -1e-12
        if not free.any():
            free[int(np.argmax(mu))] = True
        sub_w, nu = _kkt_solve(mu[free], sigma[np.ix_(free, free)], lambda_risk)
        w = np.zeros(d)
        w[free] = sub_w
    return np.maximum(w, 0.0), nu


def _kkt_solve(mu: np.ndarray, sigma: np.ndarray, lam: float) -> tuple[np.ndarray, float]:
    kkt, rhs = _bordered(mu, sigma, lam)
    try:
        cond = np.linalg.cond(kkt)
        sol = np.linalg.solve(kkt, rhs) if cond <= _COND_LIMIT else None
    except np.linalg.LinAlgError:
        sol = None
    if sol is None or not np.all(np.isfinite(sol)):
        d = mu.shape[0]
        ridge = _RIDGE_SCALE * max(float(np.trace(sigma)), 1e-30) / d
        kkt, rhs = _bordered(mu, sigma + ridge * np.eye(d), lam)
        try:
            sol = np.linalg.solve(kkt, rhs)
        except np.linalg.LinAlgError as exc:
            raise NumericError("bordered KKT system is singular even after ridging") from exc
        if not np.all(np.isfinite(sol)):
            raise NumericError("bordered KKT solve produced non-finite weights")
    return sol[:-1], float(sol[-1])


def solve_markowitz_batch(
    mu: np.ndarray, sigma: np.ndarray, lambda_risk: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectorized bordered-KKT solve over a batch of agents.

    Returns (weights, multipliers, ok) where rows with ``ok`` False failed
    even after ridging and should be treated as skipped.
    """
    mu = np.asarray(mu, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    lam = np.asarray(lambda_risk, dtype=float)
    m, d = mu.shape
    kkt = np.zeros((m, d + 1, d + 1))
    kkt[:, :d, :d] = lam[:, None, None] * sigma
    kkt[:, :d, d] = 1.0
    kkt[:, d, :d] = 1.0
    rhs = np.concatenate([mu, np.ones((m, 1))], axis=1)
    try:
        sol = np.linalg.solve(kkt, rhs[..., None])[..., 0]
        bad = ~np.all(np.isfinite(sol), axis=1) | (np.linalg.cond(kkt) > _COND_LIMIT)
    except np.linalg.LinAlgError:
        sol = np.full((m, d + 1), np.nan)
        bad = np.ones(m, dtype=bool)
    # exceptional rows (singular/ill-conditioned) go through the scalar
    # path so the ridge fallback behaves identically in both entry points
    for i in np.nonzero(bad)[0]:
        try:
            w, nu = _kkt_solve(mu[i], sigma[i], float(lam[i]))
            sol[i, :d] = w
            sol[i, d] = nu
        except (NumericError, ParameterError):
            sol[i] = np.nan
    ok = np.all(np.isfinite(sol), axis=1)
    return sol[:, :d], sol[:, d], ok


def lending_weight_closed_form(model: ReturnsModel) -> float:
    """Closed-form lending allocation from the bordered KKT solution.

    Divides by sigma_l squared: the multiplier pinned by the rank-one
    stake/derivative block gives w_l = (IR/(D-1) + mu_l) / (lambda*sigma_l^2).
    """
    if abs(model.D - 1.0) <= _DURATION_SINGULARITY:
        raise ParameterError("lending weight is singular at duration 1")
    if not model.sigma_l2 > 0:
        raise ParameterError("lending variance must be positive")
    ir = instantaneous_return(model)
    return (ir / (model.D - 1.0) + model.mu_l) / (model.lambda_risk * model.sigma_l2)


def duration_sensitivity(d: float) -> float:
    """|U(D)|: the weight/multiplier sensitivity factor, singular at D = 1."""
    if abs(d - 1.0) <= _DURATION_SINGULARITY:
        raise ParameterError("sensitivity factor is singular at duration 1")
    if d > 1.0:
        return abs(d / (d - 1.0))
    return abs(1.0 / (d - 1.0))


def constraint_sensitivity_norm(lambda_risk: float, sigma_s2: float, d_factor: float) -> float:
    """Max-abs sensitivity of the 2-asset KKT solution to the budget entry.

    Assembles the 3x3 bordered matrix numerically, inverts it, and returns
    the infinity norm of the constraint column.  For D >= 0 this equals
    a_bound_closed_form(D) exactly.
    """
    sigma = sigma_s2 * np.array([[1.0, d_factor], [d_factor, d_factor**2]])
    kkt, _ = _bordered(np.zeros(2), sigma, lambda_risk)
    inv = np.linalg.inv(kkt)
    return float(np.max(np.abs(inv[:, 2])))


def a_bound_closed_form(d: float) -> float:
    """max(|D/(D-1)|, |1/(1-D)|, 1)."""
    if abs(d - 1.0) <= _DURATION_SINGULARITY:
        raise ParameterError("closed form is singular at duration 1")
    return max(abs(d / (d - 1.0)), abs(1.0 / (1.0 - d)), 1.0)


def _two_asset_solution(mu_s: float, mu_d: float, d: float, lam_var: float) -> tuple[float, float, float]:
    """Exact (w_s, w_d, nu) of the 2-asset problem; lam_var = lambda*sigma_s2."""
    q = (mu_s - mu_d) / (lam_var * (1.0 - d))
    w_s = (q - d) / (1.0 - d)
    return w_s, 1.0 - w_s, (d * mu_s - mu_d) / (d - 1.0)


def turnover_bound(model_t: ReturnsModel, model_t1: ReturnsModel, form: str = "valid") -> float:
    """Upper bound on the l1 change of the 2-asset KKT solution (w_s, w_d, nu).

    ``form="valid"`` bounds each sensitivity of the exact solution and is
    what the oracle suite certifies against the solver.  ``form="paper"``
    is the looser printed two-term expression
    |U(D_t)|*|dmu_s + dmu_d| + |dD/((D_{t+1}-1)(D_t-1))|*|mu_s+mu_d+1|,
    which is not a guaranteed bound when the mean shifts have opposite
    signs; it is kept for reference.

    Requires matching (lambda, sigma_s2) across the pair: the bound tracks
    a duration/mean update of one quadratic program.
    """
    d0, d1 = model_t.D, model_t1.D
    for d in (d0, d1):
        if abs(d - 1.0) <= _DURATION_SINGULARITY:
            raise ParameterError("turnover bound is singular at duration 1")
    if model_t.lambda_risk != model_t1.lambda_risk or model_t.sigma_s2 != model_t1.sigma_s2:
        raise ParameterError("turnover bound assumes lambda and sigma_s2 fixed across the pair")
    mu_s0, mu_d0 = model_t.mu_s, model_t.derivative_mean()
    mu_s1, mu_d1 = model_t1.mu_s, model_t1.derivative_mean()
    dmu_s, dmu_d = mu_s1 - mu_s0, mu_d1 - mu_d0
    dd = d1 - d0
    if form == "paper":
        return duration_sensitivity(d0) * abs(dmu_s + dmu_d) + abs(
            dd / ((d1 - 1.0) * (d0 - 1.0))
        ) * abs(mu_s1 + mu_d1 + 1.0)
    if form != "valid":
        raise ParameterError(f"unknown turnover bound form {form!r}")
    lam_var = model_t.lambda_risk * model_t.sigma_s2
    if not lam_var > 0:
        raise ParameterError("turnover bound needs lambda*sigma_s2 > 0")
    # mean-shift leg at fixed duration d1
    mu_leg = (duration_sensitivity(d1) + 2.0 / (lam_var * (1.0 - d1) ** 2)) * (
        abs(dmu_s) + abs(dmu_d)
    )
    # duration leg at fixed time-t means
    q0 = (mu_s0 - mu_d0) / (lam_var * (1.0 - d0))
    d_leg = (
        abs(dd)
        / (abs(1.0 - d1) * abs(1.0 - d0))
        * (
            2.0 * abs(mu_s0 - mu_d0) / (lam_var * abs(1.0 - d1))
            + 2.0 * abs(q0 - 1.0)
            + abs(mu_s0 - mu_d0)
        )
    )
    return mu_leg + d_leg


def safe_borrow_limit(k: float, sigma_s2: float) -> float:
    """Borrow fraction below which the curve leaves mean returns unaffected."""
    if not (k > 0 and sigma_s2 > 0):
        raise ParameterError("k and sigma_s2 must be positive")
    return (k / (k + 2.0 / sigma_s2)) ** (1.0 / (k + 1.0))


@dataclass(frozen=True)
class CIRParams:
    """Mean-reverting square-root variance process parameters.

    kappa is both the reversion target and the drift rate; xi the vol of
    vol; dt the step in epochs.
    """

    kappa: float = 2.0
    xi: float = 0.3
    dt: float = 0.1
    v0: float = 2.0

    def __post_init__(self) -> None:
        if self.kappa < 0 or self.xi < 0 or self.v0 < 0:
            raise ParameterError("CIR parameters must be non-negative")
        if not self.dt > 0:
            raise ParameterError("CIR step must be positive")


def cir_step(params: CIRParams, v: float, rng: np.random.Generator) -> float:
    """One full-truncation Euler-Maruyama step; never returns a negative value."""
    return float(cir_step_many(params, np.asarray([v]), rng.standard_normal(1))[0])


def cir_step_many(params: CIRParams, v: np.ndarray, z: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    vp = np.maximum(v, 0.0)
    nxt = v + (params.kappa - vp) * params.dt + params.xi * np.sqrt(vp * params.dt) * z
    return np.maximum(nxt, 0.0)


@dataclass(frozen=True)
class LendingMarket:
    """Linear utilization model for the pooled lending rate."""

    base_rate: float = 0.02
    slope: float = 0.18
    supplied: float = 0.0
    demanded: float = 0.0

    def __post_init__(self) -> None:
        if self.base_rate < 0 or self.slope < 0:
            raise ParameterError("rate parameters must be non-negative")
        if self.supplied < 0 or self.demanded < 0:
            raise ParameterError("supplied/demanded must be non-negative")


def compute_borrow_rate(market: LendingMarket) -> float:
    """Utilization-capped linear borrow rate in [0, 1]."""
    utilization = min(market.demanded / max(market.supplied, 1e-12), 1.0)
    return min(max(market.base_rate + market.slope * utilization, 0.0), 1.0)


def mean_shift_bound_check(
    mu_s: Sequence[float],
    mu_l: Sequence[float],
    mu_d: Sequence[float],
    stake_deltas: Sequence[float],
    lend_deltas: Sequence[float],
    supplies: Sequence[float],
    lipschitz: float,
    sigma_s2: float,
    eps: float = 0.0,
) -> tuple[bool, float]:
    """Check the contraction bound on mean-return shifts along a segment.

    Fits the smallest constant C making |dmu_s| + |dmu_l| <= C * g_t with
    g_t = stake_delta*(1 + 1/supply) + lend_delta, then verifies
    (1 - L*sigma^2/2) * ||dmu||_1 <= C*g_t + 2*eps at every step.  Returns
    (holds, fitted C).  Requires the safe-regime gate L < 2/sigma^2.
    """
    if not lipschitz < 2.0 / sigma_s2:
        raise ParameterError("outside the safe regime: need L < 2/sigma_s2")
    if lipschitz < 0 or sigma_s2 <= 0:
        raise ParameterError("need L >= 0 and sigma_s2 > 0")
    mu_s = np.asarray(mu_s, float)
    mu_l = np.asarray(mu_l, float)
    mu_d = np.asarray(mu_d, float)
    steps = len(mu_s) - 1
    if steps < 1 or len(mu_l) != steps + 1 or len(mu_d) != steps + 1:
        raise ParameterError("mean paths must share a length of at least 2")
    if len(stake_deltas) != steps or len(lend_deltas) != steps or len(supplies) != steps:
        raise ParameterError("need one (stake_delta, lend_delta, supply) per step")
    d_s = np.abs(np.diff(mu_s))
    d_l = np.abs(np.diff(mu_l))
    d_d = np.abs(np.diff(mu_d))
    g = np.asarray(stake_deltas, float) * (1.0 + 1.0 / np.asarray(supplies, float)) + np.asarray(
        lend_deltas, float
    )
    if np.any(g < 0):
        raise ParameterError("stake/lend deltas and supplies must be non-negative")
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(g > 0, (d_s + d_l) / np.where(g > 0, g, 1.0), np.where(d_s + d_l > 0, np.inf, 0.0))
    fitted_c = float(np.max(ratios)) if steps else 0.0
    if not math.isfinite(fitted_c):
        return False, fitted_c
    contraction = 1.0 - 0.5 * lipschitz * sigma_s2
    lhs = contraction * (d_s + d_l + d_d)
    holds = bool(np.all(lhs <= fitted_c * g + 2.0 * eps + 1e-12))
    return holds, fitted_c
