"""INI-style configuration files for the simulators and sweeps.

Sections and field names mirror the dataclasses one-to-one; unknown
sections or keys are rejected so a typo cannot silently fall back to a
default.  Every field is optional: omitted values keep the dataclass
defaults.
"""

from __future__ import annotations

import configparser
import dataclasses
from pathlib import Path
from typing import Any, Mapping, Optional

from .core import MonetaryPolicy
from .errors import ConfigError
from .portfolio import CIRParams, LendingMarket
from .sim2 import Sim2Config
from .sim3 import Sim3Config


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


def _parse_floats(raw: str) -> tuple[float, ...]:
    try:
        values = tuple(float(tok) for tok in raw.replace(",", " ").split())
    except ValueError as exc:
        raise ConfigError(f"expected a list of numbers, got {raw!r}") from exc
    if not values:
        raise ConfigError("expected a non-empty list of numbers")
    return values


_SCHEMA: dict[str, dict[str, Any]] = {
    "monetary": {"r0": float, "lambda": float},
    "validators": {
        "lambda_stake": float,
        "lambda_collateral": float,
        "lambda_borrow": float,
        "lambda_slash": float,
        "iota": float,
    },
    "curve": {"kind": str, "k": float, "phi_max": float},
    "sim": {
        "n": int,
        "h_max": int,
        "eta": int,
        "seed": int,
        "trajectories": int,
        "sample_stride": int,
        "slash_mode": str,
        "loan_reset": _parse_bool,
        "components": int,
        "duration_at": str,
        "supply_includes_lent": _parse_bool,
        "burn_in_frac": float,
    },
    "sweep": {
        "axis1": str,
        "axis1_values": _parse_floats,
        "axis2": str,
        "axis2_values": _parse_floats,
        "trajectories": int,
    },
    "lending": {"base_rate": float, "slope": float, "demand": float},
    "cir": {"kappa": float, "xi": float, "dt": float, "v0": float},
}


def parse_config_file(path: str | Path) -> dict[str, dict[str, Any]]:
    """Parse and type-check a config file against the section schema."""
    parser = configparser.ConfigParser()
    try:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    except OSError:
        raise
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc
    result: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown config section [{section}]")
        fields = _SCHEMA[section]
        parsed: dict[str, Any] = {}
        for key, raw in parser.items(section):
            if key not in fields:
                raise ConfigError(f"unknown key {key!r} in section [{section}]")
            converter = fields[key]
            try:
                parsed[key] = converter(raw)
            except ConfigError:
                raise
            except ValueError as exc:
                raise ConfigError(f"bad value for {section}.{key}: {raw!r}") from exc
        result[section] = parsed
    return result


def _monetary(sections: Mapping[str, Mapping[str, Any]]) -> MonetaryPolicy:
    mon = sections.get("monetary", {})
    kwargs = {}
    if "r0" in mon:
        kwargs["r0"] = mon["r0"]
    if "lambda" in mon:
        kwargs["lam"] = mon["lambda"]
    return MonetaryPolicy(**kwargs)


def _common_kwargs(sections: Mapping[str, Mapping[str, Any]]) -> dict[str, Any]:
    kwargs: dict[str, Any] = {"monetary": _monetary(sections)}
    vals = sections.get("validators", {})
    kwargs.update({k: v for k, v in vals.items()})
    curve = sections.get("curve", {})
    if curve.get("kind", "powerlaw").lower() != "powerlaw":
        raise ConfigError("only the power-law curve kind is configurable from files")
    for key in ("k", "phi_max"):
        if key in curve:
            kwargs[key] = curve[key]
    sim = dict(sections.get("sim", {}))
    sim.pop("burn_in_frac", None)
    kwargs.update(sim)
    return kwargs


def build_sim2_config(sections: Mapping[str, Mapping[str, Any]], **overrides: Any) -> Sim2Config:
    kwargs = _common_kwargs(sections)
    for key in ("components", "duration_at", "supply_includes_lent"):
        kwargs.pop(key, None)
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return Sim2Config(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad sim2 configuration: {exc}") from exc


def build_sim3_config(sections: Mapping[str, Mapping[str, Any]], **overrides: Any) -> Sim3Config:
    kwargs = _common_kwargs(sections)
    lending = sections.get("lending", {})
    if lending:
        market_kwargs = {k: v for k, v in lending.items() if k != "demand"}
        kwargs["lending"] = LendingMarket(**market_kwargs)
        if "demand" in lending:
            kwargs["demand"] = lending["demand"]
    if sections.get("cir"):
        kwargs["cir"] = CIRParams(**sections["cir"])
    kwargs.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return Sim3Config(**kwargs)
    except TypeError as exc:
        raise ConfigError(f"bad sim3 configuration: {exc}") from exc


#: Config fields a sweep axis may scan.  Values land either directly on the
#: simulator config or on the nested monetary policy.
SWEEPABLE = {
    "lambda_borrow",
    "lambda_slash",
    "lambda_stake",
    "lambda_collateral",
    "iota",
    "k",
    "lambda",
}


def apply_axis(config, name: str, value: float):
    """Return a copy of ``config`` with one swept parameter replaced."""
    if name not in SWEEPABLE:
        raise ConfigError(f"parameter {name!r} is not sweepable; choose from {sorted(SWEEPABLE)}")
    if name == "lambda":
        return dataclasses.replace(config, monetary=MonetaryPolicy(config.monetary.r0, value))
    return dataclasses.replace(config, **{name: value})


def burn_in_frac(sections: Mapping[str, Mapping[str, Any]], default: float = 0.1) -> float:
    value = sections.get("sim", {}).get("burn_in_frac", default)
    if not (0.0 <= value < 1.0):
        raise ConfigError("burn_in_frac must lie in [0, 1)")
    return value


def sweep_axes(
    sections: Mapping[str, Mapping[str, Any]],
    default_axes: Optional[tuple[tuple[str, tuple[float, ...]], tuple[str, tuple[float, ...]]]] = None,
) -> tuple[tuple[str, tuple[float, ...]], tuple[str, tuple[float, ...]]]:
    sweep = sections.get("sweep", {})
    if "axis1" in sweep or "axis2" in sweep:
        for key in ("axis1", "axis1_values", "axis2", "axis2_values"):
            if key not in sweep:
                raise ConfigError(f"[sweep] section needs {key}")
        axes = (
            (sweep["axis1"], sweep["axis1_values"]),
            (sweep["axis2"], sweep["axis2_values"]),
        )
    elif default_axes is not None:
        axes = default_axes
    else:
        raise ConfigError("no sweep axes configured")
    for name, values in axes:
        if name not in SWEEPABLE:
            raise ConfigError(f"axis {name!r} is not sweepable")
        if len(values) == 0 or any(b <= a for a, b in zip(values, values[1:])):
            raise ConfigError(f"axis {name!r} values must be non-empty and strictly increasing")
    return axes
