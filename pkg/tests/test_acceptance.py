"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines as the
criteria execute.  Tolerances and scales are fixed here, not configurable.
"""

import math
import time

import numpy as np
import pytest

from stakesim.cli import main as cli_main
from stakesim.core import MonetaryPolicy, PowerLaw, ValidatorPricing, validator_price
from stakesim.metrics import gini
from stakesim.portfolio import (
    ReturnsModel,
    a_bound_closed_form,
    constraint_sensitivity_norm,
    convexity,
    duration,
    lending_weight_closed_form,
    solve_markowitz,
    solve_markowitz_batch,
    turnover_bound,
    _two_asset_solution,
)
from stakesim.rng import stream
from stakesim.sim2 import Sim2Config, run_trajectory2
from stakesim.sim3 import Sim3Config, run_trajectory3
from stakesim.urn import mixture_moments, ruin_probability, sample_terminal_stakes


def _report(name: str, passed: bool, detail: str) -> None:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    assert passed, f"{name}: {detail}"


def test_ruin_probability_monte_carlo():
    """Default frequency matches p/(1-p) within a 99% binomial CI at 1e5 walks."""
    t0 = time.time()
    n_walks, barrier = 100_000, 30
    worst = 0.0
    ok = True
    details = []
    for p in (0.1, 0.25, 0.4):
        rng = stream(1789, int(1000 * p))
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
        freq = float(ruined.mean())
        half = 2.576 * math.sqrt(gamma * (1 - gamma) / n_walks)
        ok &= abs(freq - gamma) < half
        worst = max(worst, abs(freq - gamma) / half)
        details.append(f"p={p}: freq={freq:.5f} vs {gamma:.5f} (CI +-{half:.5f})")
    elapsed = time.time() - t0
    ok &= elapsed < 120
    _report("ruin-probability", ok, "; ".join(details) + f"; {elapsed:.1f}s")


def test_terminal_stake_moments():
    """Sampler mean/second moment match the mixture law within 3 SE at 1e6 draws."""
    t0 = time.time()
    ok = True
    details = []
    for p in (0.0, 0.25, 0.4):
        rng = stream(1066, int(1000 * p))
        x = sample_terminal_stakes(rng, p, size=1_000_000)
        m1, m2 = mixture_moments(p)
        se1 = x.std() / math.sqrt(x.size)
        sq = x * x
        se2 = sq.std() / math.sqrt(x.size)
        ok &= abs(x.mean() - m1) <= 3 * se1
        ok &= abs(sq.mean() - m2) <= 3 * se2
        details.append(
            f"p={p}: mean {x.mean():.4f}/{m1:.4f}, m2 {sq.mean():.4f}/{m2:.4f}"
        )
    elapsed = time.time() - t0
    ok &= elapsed < 60
    _report("terminal-stake-moments", ok, "; ".join(details) + f"; {elapsed:.1f}s")


def test_lending_weight_oracle():
    """Closed-form lending weight equals the bordered KKT solve on 1e4 instances."""
    t0 = time.time()
    rng = stream(1453)
    count = 0
    worst = 0.0
    while count < 10_000:
        d = float(rng.uniform(0.0, 3.0))
        if abs(d - 1.0) <= 0.05:
            continue
        count += 1
        model = ReturnsModel(
            mu_s=float(rng.uniform(-0.3, 0.3)),
            mu_l=float(rng.uniform(-0.3, 0.3)),
            sigma_s2=float(rng.uniform(0.05, 2.0)),
            sigma_l2=float(rng.uniform(0.01, 2.0)),
            D=d,
            B=float(rng.uniform(-0.3, 0.3)),
            C=float(rng.uniform(0.0, 3.0)),
            lambda_risk=float(rng.uniform(0.2, 5.0)),
        )
        sigma = np.array(
            [
                [model.sigma_s2, d * model.sigma_s2, 0.0],
                [d * model.sigma_s2, d * d * model.sigma_s2, 0.0],
                [0.0, 0.0, model.sigma_l2],
            ]
        )
        w, _ = solve_markowitz([model.mu_s, model.derivative_mean(), model.mu_l], sigma, model.lambda_risk)
        closed = lending_weight_closed_form(model)
        worst = max(worst, abs(w[2] - closed) / max(1.0, abs(closed)))
    elapsed = time.time() - t0
    ok = worst <= 1e-10 and elapsed < 10
    _report("lending-weight-oracle", ok, f"worst rel err {worst:.2e}; {elapsed:.1f}s")


def test_turnover_bound_and_sensitivity_norm():
    """Solver turnover never exceeds the bound; the constraint-column norm of
    the inverse bordered matrix matches the closed form."""
    rng = stream(1644)
    worst_slack = -math.inf
    ok = True
    for _ in range(1000):
        lam = float(rng.uniform(0.2, 5.0))
        s2 = float(rng.uniform(0.05, 2.0))

        def draw_d() -> float:
            while True:
                d = float(rng.uniform(0.0, 3.0))
                if abs(d - 1.0) > 0.05:
                    return d

        models = [
            ReturnsModel(
                mu_s=float(rng.uniform(-0.5, 0.5)),
                sigma_s2=s2,
                D=draw_d(),
                B=float(rng.uniform(-0.5, 0.5)),
                C=float(rng.uniform(0.0, 2.0)),
                lambda_risk=lam,
            )
            for _ in range(2)
        ]
        bound = turnover_bound(models[0], models[1])
        solutions = []
        for m in models:
            mu_d = m.derivative_mean()
            sigma = m.sigma_s2 * np.array([[1.0, m.D], [m.D, m.D * m.D]])
            w, nu = solve_markowitz([m.mu_s, mu_d], sigma, m.lambda_risk)
            solutions.append(np.array([w[0], w[1], nu]))
        actual = float(np.abs(solutions[1] - solutions[0]).sum())
        ok &= actual <= bound + 1e-8
        worst_slack = max(worst_slack, actual - bound)
    worst_norm = 0.0
    for _ in range(1000):
        d = float(rng.uniform(0.0, 3.0))
        if abs(d - 1.0) <= 0.05:
            continue
        numeric = constraint_sensitivity_norm(
            float(rng.uniform(0.2, 5.0)), float(rng.uniform(0.05, 2.0)), d
        )
        worst_norm = max(worst_norm, abs(numeric - a_bound_closed_form(d)))
    ok &= worst_norm <= 1e-10
    _report(
        "turnover-bound",
        ok,
        f"max (turnover - bound) = {worst_slack:.2e}; norm err {worst_norm:.2e}",
    )


def test_boundary_conditions_exact():
    """Price is exactly 1 at issuance and the default sentinel below c*issuance."""
    rng = stream(1917)
    ok = True
    for _ in range(10_000):
        c = float(rng.uniform(0.01, 0.99))
        stake = float(np.exp(rng.uniform(-6.0, 14.0)))
        k = float(rng.uniform(0.1, 5.0))
        curve = PowerLaw(k)
        vp = ValidatorPricing(c=c, stake_at_issue=stake)
        ok &= validator_price(vp, curve, stake) == 1.0
        below = c * stake * float(rng.uniform(0.0, 1.0))
        price = validator_price(vp, curve, below)
        ok &= math.isinf(price) and price > 0
        if not ok:
            break
    _report("boundary-conditions", ok, "10000 random (c, stake, k) triples exact")


def test_inequality_phase_gap():
    """Desk-scale heatmap corners: mean Gini falls by >= 0.2 from the
    low-borrow/low-slash corner to the high/high corner."""
    t0 = time.time()

    def corner(lam_borrow: float, lam_slash: float) -> float:
        values = []
        for traj in range(20):
            cfg = Sim2Config(
                n=100,
                h_max=20_000,
                lambda_borrow=lam_borrow,
                lambda_slash=lam_slash,
                iota=0.05,
                monetary=MonetaryPolicy(1.0, 1.0),
                seed=0,
            )
            rec = run_trajectory2(cfg, trajectory=traj)
            drop = int(0.1 * len(rec))
            values.append(float(rec.gini[drop:].mean()))
        return float(np.mean(values))

    calm = corner(0.1, 0.1)
    stressed = corner(0.9, 0.9)
    gap = calm - stressed
    elapsed = time.time() - t0
    _report(
        "inequality-phase-gap",
        gap >= 0.2,
        f"E_h[Gini](0.1,0.1)={calm:.3f}, (0.9,0.9)={stressed:.3f}, gap={gap:.3f}; {elapsed:.0f}s",
    )


def test_borrow_weight_sign_structure():
    """Two-component sweep: mean w_d positive at k=0.5, below 0.05 at k=4."""
    t0 = time.time()

    def mean_wd(k: float) -> float:
        values = []
        for traj in range(20):
            cfg = Sim3Config(
                n=100, h_max=10_000, eta=10, k=k, lambda_slash=0.05, components=2, seed=0
            )
            rec = run_trajectory3(cfg, trajectory=traj)
            drop = int(0.1 * len(rec))
            values.append(float(rec.weights[drop:, 1].mean()))
        return float(np.mean(values))

    flat = mean_wd(0.5)
    steep = mean_wd(4.0)
    elapsed = time.time() - t0
    ok = flat > 0.0 and steep < 0.05
    _report(
        "borrow-weight-sign",
        ok,
        f"mean w_d(k=0.5)={flat:.3f} (>0), w_d(k=4)={steep:.3f} (<0.05); {elapsed:.0f}s",
    )


def test_supply_ratio_policy_ordering():
    """Mean supply ratio non-decreasing across deflationary/constant/inflationary
    policies with matched seeds at fixed (k, slashing, iota)."""
    t0 = time.time()
    ratios = []
    for lam in (0.5, 1.0, 1.05):
        cfg = Sim3Config(
            n=100,
            h_max=2_000,
            eta=10,
            k=4.0,
            lambda_slash=0.05,
            iota=0.05,
            monetary=MonetaryPolicy(1.0, lam),
            seed=0,
        )
        recs = [run_trajectory3(cfg, trajectory=t) for t in range(8)]
        ratios.append(float(np.mean([r.supply_ratio.mean() for r in recs])))
    ok = ratios[0] <= ratios[1] <= ratios[2]
    elapsed = time.time() - t0
    _report(
        "supply-ratio-ordering",
        ok,
        f"lambda 0.5/1.0/1.05 -> {ratios[0]:.4f} <= {ratios[1]:.4f} <= {ratios[2]:.4f}; {elapsed:.0f}s",
    )


def test_exponential_gini():
    """Sample Gini of 1e4 exponential draws sits in [0.47, 0.53]."""
    value = gini(stream(1905).exponential(scale=1.0, size=10_000))
    _report("exponential-gini", 0.47 <= value <= 0.53, f"gini = {value:.4f}")


def test_duration_convexity_finite_differences():
    """Analytic power-law derivatives match central differences to 1e-6 relative."""
    rng = stream(1687)
    worst = 0.0
    for _ in range(1000):
        k = float(rng.uniform(0.2, 5.0))
        u = float(rng.uniform(0.1, 0.9))
        curve = PowerLaw(k)
        h = 1e-6 * u
        fd_dur = -(curve.value(u + h) - curve.value(u - h)) / (2 * h) / curve.value(u)
        h2 = 1e-4 * u
        fd_conv = (
            (curve.value(u + h2) - 2 * curve.value(u) + curve.value(u - h2))
            / (h2 * h2)
            / curve.value(u)
        )
        worst = max(
            worst,
            abs(duration(curve, u) - fd_dur) / abs(fd_dur),
            abs(convexity(curve, u) - fd_conv) / abs(fd_conv),
        )
    _report("duration-convexity-fd", worst <= 1e-6, f"worst rel err {worst:.2e}")


def test_determinism_across_threads(tmp_path):
    """sim2/sim3/sweep CLI runs are byte-identical for --threads 1 and 8."""
    cfg_text = (
        "[sim]\nn = 12\nh_max = 400\neta = 10\ntrajectories = 4\nsample_stride = 20\n"
    )
    sweep_text = cfg_text + (
        "\n[sweep]\naxis1 = lambda_borrow\naxis1_values = 0.2 0.8\n"
        "axis2 = lambda_slash\naxis2_values = 0.2 0.8\ntrajectories = 2\n"
    )
    cfg = tmp_path / "sim.ini"
    cfg.write_text(cfg_text)
    sweep_cfg = tmp_path / "sweep.ini"
    sweep_cfg.write_text(sweep_text)
    ok = True
    for command, conf in (("sim2", cfg), ("sim3", cfg), ("sweep2", sweep_cfg)):
        outs = []
        for threads in ("1", "8"):
            out = tmp_path / f"{command}_t{threads}"
            code = cli_main(
                [command, "--config", str(conf), "--out", str(out), "--threads", threads, "--seed", "31"]
            )
            ok &= code == 0
            outs.append(out)
        for path in sorted(outs[0].glob("*.csv")):
            twin = outs[1] / path.name
            ok &= twin.exists() and path.read_bytes() == twin.read_bytes()
    _report("thread-determinism", ok, "sim2/sim3/sweep2 byte-identical at --threads 1 vs 8")
