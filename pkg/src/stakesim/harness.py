"""Sweep grids, analytic tables and deterministic CSV emission.

Every sweep cell is seeded from (master_seed, axis1_index, axis2_index,
trajectory_index), so results depend only on coordinates, never on thread
count or execution order.  Completed cells are checkpointed into an
on-disk manifest and skipped on rerun; all files are written atomically.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import tempfile
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .config import SWEEPABLE, apply_axis
from .errors import ConfigError, StakesimError
from .portfolio import safe_borrow_limit
from .sim2 import Sim2Config, TrajectoryRecord, run_trajectory2
from .sim3 import Sim3Config, run_trajectory3
from .urn import dispersion_index, ruin_probability, survivor_scale

TRAJECTORY_HEADER = "h,gini,norm_ratio,supply_ratio,frac_defaulted,w_s,w_d,w_l"
SWEEP_HEADER = "axis1_name,axis1_value,axis2_name,axis2_value,metric,stat,value"
ANALYTIC_HEADER = "p,gamma,beta,aleph,k,sigma_s2,s_star"

BASE_METRICS = ("gini", "norm_ratio", "supply_ratio", "frac_defaulted")
WEIGHT_METRICS = ("w_s", "w_d", "w_l")


def _fmt(value: float) -> str:
    """Shortest round-tripping decimal form; stable across runs."""
    return repr(float(value))


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trajectory_csv(path: Path, record: TrajectoryRecord) -> None:
    lines = [TRAJECTORY_HEADER]
    has_w = record.weights is not None
    for i, h in enumerate(record.heights):
        cells = [
            str(int(h)),
            _fmt(record.gini[i]),
            _fmt(record.norm_ratio[i]),
            _fmt(record.supply_ratio[i]),
            _fmt(record.frac_defaulted[i]),
        ]
        if has_w:
            cells.extend(_fmt(record.weights[i, j]) for j in range(3))
        else:
            cells.extend(["", "", ""])
        lines.append(",".join(cells))
    _atomic_write(path, "\n".join(lines) + "\n")


def mean_record(records: Sequence[TrajectoryRecord]) -> TrajectoryRecord:
    """Pointwise mean across trajectories, reduced in index order."""
    if not records:
        raise StakesimError("no trajectories to aggregate")
    heights = records[0].heights
    for rec in records[1:]:
        if not np.array_equal(rec.heights, heights):
            raise StakesimError("trajectories sampled different heights")
    def avg(name):
        return np.mean([rec.metric(name) for rec in records], axis=0)
    weights = None
    if records[0].weights is not None:
        weights = np.stack([rec.weights for rec in records]).mean(axis=0)
    return TrajectoryRecord(
        heights=heights,
        gini=avg("gini"),
        norm_ratio=avg("norm_ratio"),
        supply_ratio=avg("supply_ratio"),
        frac_defaulted=avg("frac_defaulted"),
        alive=np.mean([rec.alive for rec in records], axis=0),
        weights=weights,
    )


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition over two swept parameters plus the base config."""

    base: Union[Sim2Config, Sim3Config]
    axis1: str
    axis1_values: tuple[float, ...]
    axis2: str
    axis2_values: tuple[float, ...]
    trajectories: int = 20
    burn_in_frac: float = 0.1

    def __post_init__(self) -> None:
        for name, values in ((self.axis1, self.axis1_values), (self.axis2, self.axis2_values)):
            if name not in SWEEPABLE:
                raise ConfigError(f"axis {name!r} is not sweepable; choose from {sorted(SWEEPABLE)}")
            if len(values) == 0:
                raise ConfigError(f"axis {name!r} has no values")
            if any(b <= a for a, b in zip(values, values[1:])):
                raise ConfigError(f"axis {name!r} values must be strictly increasing")
        if self.trajectories < 1:
            raise ConfigError("trajectories must be >= 1")
        if not (0.0 <= self.burn_in_frac < 1.0):
            raise ConfigError("burn_in_frac must lie in [0, 1)")

    @property
    def kind(self) -> str:
        return "sim3" if isinstance(self.base, Sim3Config) else "sim2"

    @property
    def metrics(self) -> tuple[str, ...]:
        return BASE_METRICS + WEIGHT_METRICS if self.kind == "sim3" else BASE_METRICS

    def cell_config(self, i1: int, i2: int):
        cfg = apply_axis(self.base, self.axis1, self.axis1_values[i1])
        return apply_axis(cfg, self.axis2, self.axis2_values[i2])

    def fingerprint(self) -> str:
        payload = json.dumps(
            {
                "base": dataclasses.asdict(self.base),
                "axis1": [self.axis1, list(self.axis1_values)],
                "axis2": [self.axis2, list(self.axis2_values)],
                "trajectories": self.trajectories,
                "burn_in": self.burn_in_frac,
                "kind": self.kind,
            },
            sort_keys=True,
            default=str,
        )
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(frozen=True)
class SweepRow:
    axis1_name: str
    axis1_value: float
    axis2_name: str
    axis2_value: float
    metric: str
    stat: str
    value: float


@dataclass
class SweepGrid:
    rows: list[SweepRow]

    def value(self, axis1_value: float, axis2_value: float, metric: str, stat: str) -> float:
        for row in self.rows:
            if (
                row.axis1_value == axis1_value
                and row.axis2_value == axis2_value
                and row.metric == metric
                and row.stat == stat
            ):
                return row.value
        raise KeyError((axis1_value, axis2_value, metric, stat))

    def to_csv(self) -> str:
        lines = [SWEEP_HEADER]
        for r in self.rows:
            lines.append(
                ",".join(
                    [
                        r.axis1_name,
                        _fmt(r.axis1_value),
                        r.axis2_name,
                        _fmt(r.axis2_value),
                        r.metric,
                        r.stat,
                        _fmt(r.value),
                    ]
                )
            )
        return "\n".join(lines) + "\n"

    @classmethod
    def from_csv(cls, text: str) -> "SweepGrid":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0] != SWEEP_HEADER:
            raise StakesimError(f"sweep CSV must start with header {SWEEP_HEADER!r}")
        rows = []
        for ln in lines[1:]:
            a1n, a1v, a2n, a2v, metric, stat, value = ln.split(",")
            rows.append(SweepRow(a1n, float(a1v), a2n, float(a2v), metric, stat, float(value)))
        return cls(rows)


def _run_cell_trajectory(spec: SweepSpec, cfg, i1: int, i2: int, traj: int) -> TrajectoryRecord:
    if spec.kind == "sim3":
        return run_trajectory3(cfg, trajectory=traj, cell=(i1, i2))
    return run_trajectory2(cfg, trajectory=traj, cell=(i1, i2))


def cell_statistics(spec: SweepSpec, i1: int, i2: int) -> dict[str, dict[str, float]]:
    """Per-trajectory height aggregates averaged across the cell's trajectories.

    stat "mean" is the across-trajectory mean of per-trajectory height
    means (burn-in dropped); stat "std" averages the per-trajectory height
    standard deviations the same way.
    """
    cfg = spec.cell_config(i1, i2)
    sums: dict[str, dict[str, float]] = {
        m: {"mean": 0.0, "std": 0.0} for m in spec.metrics
    }
    for traj in range(spec.trajectories):
        rec = _run_cell_trajectory(spec, cfg, i1, i2, traj)
        drop = int(spec.burn_in_frac * len(rec))
        for m in spec.metrics:
            series = rec.metric(m)[drop:]
            if not np.all(np.isfinite(series)):
                raise StakesimError(f"non-finite {m} in cell ({i1},{i2}) trajectory {traj}")
            sums[m]["mean"] += float(series.mean())
            sums[m]["std"] += float(series.std())
    return {
        m: {stat: total / spec.trajectories for stat, total in stats.items()}
        for m, stats in sums.items()
    }


class _Manifest:
    """Checkpoint of completed sweep cells, written atomically after each."""

    def __init__(self, path: Path, fingerprint: str):
        self.path = path
        self.fingerprint = fingerprint
        self.lock = threading.Lock()
        self.cells: dict[str, dict] = {}
        if path.exists():
            try:
                data = json.loads(path.read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError):
                data = {}
            if data.get("fingerprint") == fingerprint:
                self.cells = data.get("cells", {})

    @staticmethod
    def key(i1: int, i2: int) -> str:
        return f"{i1},{i2}"

    def get(self, i1: int, i2: int) -> Optional[dict]:
        return self.cells.get(self.key(i1, i2))

    def put(self, i1: int, i2: int, stats: dict) -> None:
        with self.lock:
            self.cells[self.key(i1, i2)] = stats
            _atomic_write(
                self.path,
                json.dumps({"fingerprint": self.fingerprint, "cells": self.cells}, sort_keys=True),
            )


def run_sweep(
    spec: SweepSpec, out_dir: Union[str, Path], threads: int = 1, resume: bool = True
) -> SweepGrid:
    """Run every grid cell (resuming completed ones) and emit sweep.csv."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest = _Manifest(out / "manifest.json", spec.fingerprint())
    if not resume:
        manifest.cells = {}
    coords = [(i1, i2) for i1 in range(len(spec.axis1_values)) for i2 in range(len(spec.axis2_values))]
    pending = [c for c in coords if manifest.get(*c) is None]

    def work(coord: tuple[int, int]) -> None:
        i1, i2 = coord
        try:
            stats = cell_statistics(spec, i1, i2)
        except OSError as exc:
            raise StakesimError(f"I/O failure in sweep cell ({i1},{i2}): {exc}") from exc
        manifest.put(i1, i2, stats)

    if pending:
        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                for future in [pool.submit(work, c) for c in pending]:
                    future.result()
        else:
            for coord in pending:
                work(coord)

    rows: list[SweepRow] = []
    for i1, i2 in coords:
        stats = manifest.get(i1, i2)
        for metric in spec.metrics:
            for stat in ("mean", "std"):
                rows.append(
                    SweepRow(
                        spec.axis1,
                        spec.axis1_values[i1],
                        spec.axis2,
                        spec.axis2_values[i2],
                        metric,
                        stat,
                        stats[metric][stat],
                    )
                )
    grid = SweepGrid(rows)
    _atomic_write(out / "sweep.csv", grid.to_csv())
    return grid


def analytic_report(
    p_values: Iterable[float],
    k_values: Iterable[float],
    sigma2_values: Iterable[float],
) -> list[dict[str, float]]:
    """Closed-form table: ruin probability, survivor scale, dispersion index
    and the safe borrow limit over the requested grids."""
    rows = []
    for p in p_values:
        if not (0.0 <= p <= 0.5):
            raise ConfigError(f"analytic grid requires p in [0, 0.5], got {p}")
        gamma = ruin_probability(p)
        beta = survivor_scale(p) if p < 0.5 else math.inf
        aleph = dispersion_index(p, gamma, beta) if math.isfinite(beta) else math.inf
        for k in k_values:
            for s2 in sigma2_values:
                rows.append(
                    {
                        "p": p,
                        "gamma": gamma,
                        "beta": beta,
                        "aleph": aleph,
                        "k": k,
                        "sigma_s2": s2,
                        "s_star": safe_borrow_limit(k, s2),
                    }
                )
    return rows


def write_analytic_csv(path: Path, rows: Sequence[dict[str, float]]) -> None:
    lines = [ANALYTIC_HEADER]
    for row in rows:
        lines.append(",".join(_fmt(row[col]) for col in ANALYTIC_HEADER.split(",")))
    _atomic_write(path, "\n".join(lines) + "\n")


def run_simulation(
    config: Union[Sim2Config, Sim3Config], out_dir: Union[str, Path], threads: int = 1
) -> list[TrajectoryRecord]:
    """Run all configured trajectories, writing one CSV each plus the mean.

    Used by both the CLI and the service; byte-identical for any thread
    count because every trajectory owns a seed-derived stream and files
    are assembled in index order.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    is3 = isinstance(config, Sim3Config)

    def one(traj: int) -> TrajectoryRecord:
        if is3:
            return run_trajectory3(config, trajectory=traj)
        return run_trajectory2(config, trajectory=traj)

    indices = range(config.trajectories)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, indices))
    else:
        records = [one(t) for t in indices]
    for traj, rec in enumerate(records):
        write_trajectory_csv(out / f"trajectory_{traj:03d}.csv", rec)
    write_trajectory_csv(out / "aggregate.csv", mean_record(records))
    return records
