"""Command-line interface.

Subcommands run the shared runner layer in-process and write CSVs under
--out.  Exit codes: 0 success, 2 configuration error, 3 runtime/numeric
error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Optional

from .config import (
    build_sim2_config,
    build_sim3_config,
    burn_in_frac,
    parse_config_file,
    sweep_axes,
)
from .errors import ConfigError, NumericError, ParameterError, StakesimError
from .harness import SweepSpec, analytic_report, run_simulation, run_sweep, write_analytic_csv

FULL_SCALE_H_MAX = 200_000
FULL_SCALE_TRAJECTORIES = 100

DEFAULT_SWEEP2_AXES = (
    ("lambda_borrow", tuple(round(0.1 * i, 1) for i in range(1, 10))),
    ("lambda_slash", tuple(round(0.1 * i, 1) for i in range(1, 10))),
)
DEFAULT_SWEEP3_AXES = (
    ("k", (0.25, 0.5, 1.0, 2.0, 4.0)),
    ("lambda_slash", (0.05, 0.1, 0.2, 0.35, 0.5)),
)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, default=None, help="INI config file")
    parser.add_argument("--seed", type=int, default=None, help="master seed")
    parser.add_argument("--out", type=Path, required=True, help="output directory")
    parser.add_argument("--trajectories", type=int, default=None)
    parser.add_argument("--h-max", type=int, default=None, dest="h_max")
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument(
        "--full-scale",
        action="store_true",
        help=f"paper scale: h_max={FULL_SCALE_H_MAX}, {FULL_SCALE_TRAJECTORIES} trajectories",
    )


def _grid(raw: str) -> tuple[float, ...]:
    try:
        return tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"bad grid {raw!r}") from exc


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="stakesim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_analytic = sub.add_parser("analytic", help="emit the closed-form oracle table")
    p_analytic.add_argument("--out", type=Path, required=True)
    p_analytic.add_argument("--p-grid", type=_grid, default=(0.0, 0.1, 0.25, 0.4, 0.5))
    p_analytic.add_argument("--k-grid", type=_grid, default=(0.5, 1.0, 2.0, 4.0))
    p_analytic.add_argument("--sigma2-grid", type=_grid, default=(0.5, 1.0, 2.0))

    for name, helptext in (
        ("sim2", "stake + derivative Monte Carlo"),
        ("sim3", "stake + derivative + lending Monte Carlo"),
        ("sweep2", "two-component parameter sweep"),
        ("sweep3", "three-component parameter sweep"),
    ):
        p = sub.add_parser(name, help=helptext)
        _add_common(p)

    p_serve = sub.add_parser("serve", help="run the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    return parser


def _overrides(args: argparse.Namespace) -> dict:
    over = {"seed": args.seed, "trajectories": args.trajectories, "h_max": args.h_max}
    if args.full_scale:
        over["h_max"] = over["h_max"] or FULL_SCALE_H_MAX
        over["trajectories"] = over["trajectories"] or FULL_SCALE_TRAJECTORIES
    return over


def _sections(args: argparse.Namespace) -> dict:
    if args.config is None:
        return {}
    return parse_config_file(args.config)


def _cmd_analytic(args: argparse.Namespace) -> int:
    rows = analytic_report(args.p_grid, args.k_grid, args.sigma2_grid)
    args.out.mkdir(parents=True, exist_ok=True)
    write_analytic_csv(args.out / "analytic.csv", rows)
    print(f"wrote {len(rows)} analytic rows to {args.out / 'analytic.csv'}")
    return 0


def _cmd_sim(args: argparse.Namespace, three: bool) -> int:
    sections = _sections(args)
    build = build_sim3_config if three else build_sim2_config
    config = build(sections, **_overrides(args))
    records = run_simulation(config, args.out, threads=args.threads)
    print(f"wrote {len(records)} trajectories to {args.out}")
    return 0


def _cmd_sweep(args: argparse.Namespace, three: bool) -> int:
    sections = _sections(args)
    build = build_sim3_config if three else build_sim2_config
    base = build(sections, **_overrides(args))
    axes = sweep_axes(sections, DEFAULT_SWEEP3_AXES if three else DEFAULT_SWEEP2_AXES)
    trajectories = sections.get("sweep", {}).get("trajectories", base.trajectories)
    if args.full_scale and args.trajectories is None:
        trajectories = FULL_SCALE_TRAJECTORIES
    spec = SweepSpec(
        base=base,
        axis1=axes[0][0],
        axis1_values=axes[0][1],
        axis2=axes[1][0],
        axis2_values=axes[1][1],
        trajectories=trajectories,
        burn_in_frac=burn_in_frac(sections),
    )
    grid = run_sweep(spec, args.out, threads=args.threads)
    print(f"wrote {len(grid.rows)} sweep rows to {Path(args.out) / 'sweep.csv'}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port)
    return 0


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "analytic":
            return _cmd_analytic(args)
        if args.command == "sim2":
            return _cmd_sim(args, three=False)
        if args.command == "sim3":
            return _cmd_sim(args, three=True)
        if args.command == "sweep2":
            return _cmd_sweep(args, three=False)
        if args.command == "sweep3":
            return _cmd_sweep(args, three=True)
        if args.command == "serve":
            return _cmd_serve(args)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericError, ParameterError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 4
    except StakesimError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
