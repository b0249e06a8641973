"""FastAPI service wrapping the simulation package.

Analytic tables, curve pricing and small simulation runs are synchronous;
sweeps run as background jobs that write CSVs server-side and are polled
via /jobs/{id}.  The CLI uses the same runner functions in-process.
"""

from __future__ import annotations

import math
import threading
import uuid
from dataclasses import replace

from fastapi import FastAPI, HTTPException

from .. import __version__
from ..core import MonetaryPolicy, PowerLaw, ValidatorPricing, validator_price
from ..errors import ConfigError, StakesimError
from ..harness import SweepSpec, analytic_report, mean_record, run_sweep
from ..portfolio import CIRParams, LendingMarket
from ..sim2 import Sim2Config, run_trajectory2
from ..sim3 import Sim3Config, run_trajectory3
from . import schemas

_SYNC_BLOCK_BUDGET = 50_000_000  # n * h_max * trajectories cap for sync runs


def _sim2_config(req: schemas.Sim2Request) -> Sim2Config:
    return Sim2Config(
        n=req.n,
        h_max=req.h_max,
        eta=req.eta,
        lambda_stake=req.lambda_stake,
        lambda_collateral=req.lambda_collateral,
        lambda_borrow=req.lambda_borrow,
        lambda_slash=req.lambda_slash,
        iota=req.iota,
        monetary=MonetaryPolicy(req.monetary.r0, req.monetary.lam),
        k=req.k,
        phi_max=req.phi_max,
        seed=req.seed,
        trajectories=req.trajectories,
        sample_stride=req.sample_stride,
        slash_mode=req.slash_mode,
    )


def _sim3_config(req: schemas.Sim3Request) -> Sim3Config:
    base = _sim2_config(req)
    return Sim3Config(
        **{f: getattr(base, f) for f in base.__dataclass_fields__},
        cir=CIRParams(kappa=req.cir_kappa, xi=req.cir_xi, dt=req.cir_dt, v0=req.cir_v0),
        lending=LendingMarket(base_rate=req.lending_base_rate, slope=req.lending_slope),
        demand=req.demand,
        components=req.components,
        duration_at=req.duration_at,
    )


def _budget_check(cfg) -> None:
    cost = cfg.n * cfg.h_max * cfg.trajectories
    if cost > _SYNC_BLOCK_BUDGET:
        raise HTTPException(
            status_code=413,
            detail=f"synchronous run too large ({cost} validator-blocks); submit a sweep job",
        )


def _rows(record, with_weights: bool) -> list[schemas.TrajectoryRow]:
    rows = []
    for i, h in enumerate(record.heights):
        row = schemas.TrajectoryRow(
            h=int(h),
            gini=float(record.gini[i]),
            norm_ratio=float(record.norm_ratio[i]),
            supply_ratio=float(record.supply_ratio[i]),
            frac_defaulted=float(record.frac_defaulted[i]),
        )
        if with_weights and record.weights is not None:
            row.w_s = float(record.weights[i, 0])
            row.w_d = float(record.weights[i, 1])
            row.w_l = float(record.weights[i, 2])
        rows.append(row)
    return rows


class _Jobs:
    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._jobs: dict[str, schemas.JobStatus] = {}

    def submit(self, target, *args) -> str:
        job_id = uuid.uuid4().hex[:12]
        with self._lock:
            self._jobs[job_id] = schemas.JobStatus(job_id=job_id, state="running")

        def run() -> None:
            try:
                csv_path = target(*args)
                status = schemas.JobStatus(job_id=job_id, state="done", csv_path=str(csv_path))
            except Exception as exc:  # surfaced through the status endpoint
                status = schemas.JobStatus(job_id=job_id, state="failed", detail=str(exc))
            with self._lock:
                self._jobs[job_id] = status

        threading.Thread(target=run, daemon=True).start()
        return job_id

    def get(self, job_id: str) -> schemas.JobStatus:
        with self._lock:
            if job_id not in self._jobs:
                raise HTTPException(status_code=404, detail="unknown job")
            return self._jobs[job_id]


def create_app() -> FastAPI:
    app = FastAPI(title="stakesim", version=__version__)
    jobs = _Jobs()

    @app.get("/health", response_model=schemas.HealthResponse)
    def health() -> schemas.HealthResponse:
        return schemas.HealthResponse(version=__version__)

    @app.post("/analytic", response_model=schemas.AnalyticResponse)
    def analytic(req: schemas.AnalyticRequest) -> schemas.AnalyticResponse:
        try:
            rows = analytic_report(req.p_grid, req.k_grid, req.sigma2_grid)
        except StakesimError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.AnalyticResponse(rows=[schemas.AnalyticRow(**row) for row in rows])

    @app.post("/curves/price", response_model=schemas.CurvePriceResponse)
    def curve_price(req: schemas.CurvePriceRequest) -> schemas.CurvePriceResponse:
        curve = PowerLaw(req.k)
        vp = ValidatorPricing(c=req.c, stake_at_issue=1.0)
        try:
            prices = [validator_price(vp, curve, max(r, 0.0)) for r in req.stake_ratios]
        except StakesimError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return schemas.CurvePriceResponse(
            prices=[p if math.isfinite(p) else float("inf") for p in prices]
        )

    @app.post("/sim2/run", response_model=schemas.SimResponse)
    def sim2_run(req: schemas.Sim2Request) -> schemas.SimResponse:
        try:
            cfg = _sim2_config(req)
        except (ConfigError, StakesimError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        _budget_check(cfg)
        records = [run_trajectory2(cfg, trajectory=t) for t in range(cfg.trajectories)]
        return schemas.SimResponse(
            trajectories=len(records), aggregate=_rows(mean_record(records), False)
        )

    @app.post("/sim3/run", response_model=schemas.SimResponse)
    def sim3_run(req: schemas.Sim3Request) -> schemas.SimResponse:
        try:
            cfg = _sim3_config(req)
        except (ConfigError, StakesimError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        _budget_check(cfg)
        records = [run_trajectory3(cfg, trajectory=t) for t in range(cfg.trajectories)]
        return schemas.SimResponse(
            trajectories=len(records), aggregate=_rows(mean_record(records), True)
        )

    @app.post("/sweeps", response_model=schemas.SweepSubmitResponse)
    def submit_sweep(req: schemas.SweepRequest) -> schemas.SweepSubmitResponse:
        try:
            base = _sim3_config(req.base) if req.kind == "sim3" else _sim2_config(req.base)
            if req.kind == "sim2" and isinstance(base, Sim3Config):
                base = replace(base)
            spec = SweepSpec(
                base=base,
                axis1=req.axis1,
                axis1_values=tuple(req.axis1_values),
                axis2=req.axis2,
                axis2_values=tuple(req.axis2_values),
                trajectories=req.trajectories,
                burn_in_frac=req.burn_in_frac,
            )
        except (ConfigError, StakesimError) as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc

        def work() -> str:
            run_sweep(spec, req.out_dir, threads=req.threads)
            return str(req.out_dir) + "/sweep.csv"

        return schemas.SweepSubmitResponse(job_id=jobs.submit(work))

    @app.get("/jobs/{job_id}", response_model=schemas.JobStatus)
    def job_status(job_id: str) -> schemas.JobStatus:
        return jobs.get(job_id)

    return app
