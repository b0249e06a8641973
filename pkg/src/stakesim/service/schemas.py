"""Pydantic request/response models for the HTTP service."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field


class HealthResponse(BaseModel):
    status: Literal["ok"] = "ok"
    version: str


class AnalyticRequest(BaseModel):
    p_grid: list[float] = Field(default=[0.0, 0.1, 0.25, 0.4, 0.5])
    k_grid: list[float] = Field(default=[0.5, 1.0, 2.0, 4.0])
    sigma2_grid: list[float] = Field(default=[0.5, 1.0, 2.0])


class AnalyticRow(BaseModel):
    p: float
    gamma: float
    beta: float
    aleph: float
    k: float
    sigma_s2: float
    s_star: float


class AnalyticResponse(BaseModel):
    rows: list[AnalyticRow]


class CurvePriceRequest(BaseModel):
    k: float = Field(ge=0)
    c: float = Field(gt=0, lt=1)
    stake_ratios: list[float] = Field(min_length=1, description="current/issuance stake ratios")


class CurvePriceResponse(BaseModel):
    prices: list[float] = Field(description="redemption prices; defaults reported as +inf strings")


class MonetaryModel(BaseModel):
    r0: float = Field(default=1.0, gt=0)
    lam: float = Field(default=1.0, gt=0, alias="lambda")

    model_config = {"populate_by_name": True}


class SimRequestBase(BaseModel):
    n: int = Field(default=100, ge=2)
    h_max: int = Field(default=5_000, ge=1)
    eta: int = Field(default=10, ge=1)
    lambda_stake: float = Field(default=1.0, gt=0)
    lambda_collateral: float = Field(default=20.0, gt=0)
    lambda_borrow: float = Field(default=0.5, gt=0)
    lambda_slash: float = Field(default=0.5, gt=0)
    iota: float = Field(default=0.05, gt=0, lt=1)
    k: float = Field(default=1.0, ge=0)
    phi_max: float = Field(default=1.0e6, gt=1)
    seed: int = 0
    trajectories: int = Field(default=4, ge=1)
    sample_stride: int = Field(default=100, ge=1)
    slash_mode: Literal["independent", "selected"] = "independent"
    monetary: MonetaryModel = Field(default_factory=MonetaryModel)


class Sim2Request(SimRequestBase):
    pass


class Sim3Request(SimRequestBase):
    components: Literal[2, 3] = 3
    duration_at: Literal["issuance_ratio", "stake_share"] = "issuance_ratio"
    demand: float = Field(default=50.0, ge=0)
    cir_kappa: float = Field(default=2.0, ge=0)
    cir_xi: float = Field(default=0.3, ge=0)
    cir_dt: float = Field(default=0.1, gt=0)
    cir_v0: float = Field(default=2.0, ge=0)
    lending_base_rate: float = Field(default=0.02, ge=0)
    lending_slope: float = Field(default=0.18, ge=0)


class TrajectoryRow(BaseModel):
    h: int
    gini: float
    norm_ratio: float
    supply_ratio: float
    frac_defaulted: float
    w_s: Optional[float] = None
    w_d: Optional[float] = None
    w_l: Optional[float] = None


class SimResponse(BaseModel):
    trajectories: int
    aggregate: list[TrajectoryRow] = Field(description="mean over trajectories per sampled height")


class SweepRequest(BaseModel):
    kind: Literal["sim2", "sim3"] = "sim2"
    base: Sim3Request = Field(default_factory=Sim3Request)
    axis1: str = "lambda_borrow"
    axis1_values: list[float] = Field(default=[0.1, 0.9])
    axis2: str = "lambda_slash"
    axis2_values: list[float] = Field(default=[0.1, 0.9])
    trajectories: int = Field(default=4, ge=1)
    burn_in_frac: float = Field(default=0.1, ge=0, lt=1)
    out_dir: str = Field(description="server-side directory receiving sweep.csv + manifest")
    threads: int = Field(default=1, ge=1)


class JobStatus(BaseModel):
    job_id: str
    state: Literal["running", "done", "failed"]
    detail: Optional[str] = None
    csv_path: Optional[str] = None


class SweepSubmitResponse(BaseModel):
    job_id: str
