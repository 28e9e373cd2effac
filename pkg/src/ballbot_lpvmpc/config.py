"""Flat TOML configuration with ``model``, ``mpc``, ``refine`` and
``scenario`` sections.

Recognized keys::

    [model]    preset, b1, b2, b3, b4, ell, r_b, r_w, g, alpha
    [mpc]      N, ts, Q (4 diagonal entries), R, terminal ("dare" | "care"),
               P (4x4 nested list, overrides terminal), K (1x4, informational),
               x_max (4 entries, inf allowed), u_max, guarantees
    [refine]   p (6 entries), b0 (4 entries), tol, max_iter
    [scenario] duration
"""
from __future__ import annotations

import math
from pathlib import Path

import tomli

from .errors import ConfigError
from .model import PRESETS, PhysicalParams

SECTIONS = {
    "model": {"preset", "b1", "b2", "b3", "b4", "ell", "r_b", "r_w", "g", "alpha"},
    "mpc": {"N", "ts", "Q", "R", "terminal", "P", "K", "x_max", "u_max", "guarantees"},
    "refine": {"p", "b0", "tol", "max_iter"},
    "scenario": {"duration"},
}


def load_config(path) -> dict:
    """Parse and validate a config file; returns ``{section: {key: value}}``."""
    try:
        with Path(path).open("rb") as fh:
            data = tomli.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomli.TOMLDecodeError as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc
    for section, values in data.items():
        if section not in SECTIONS:
            raise ConfigError(f"unknown section [{section}]")
        if not isinstance(values, dict):
            raise ConfigError(f"[{section}] must be a table")
        unknown = set(values) - SECTIONS[section]
        if unknown:
            raise ConfigError(f"unknown keys in [{section}]: {sorted(unknown)}")
    return data


def params_from_config(cfg: dict, preset: str | None = None) -> PhysicalParams:
    model = dict(cfg.get("model", {}))
    name = preset or model.pop("preset", "paper-2024")
    model.pop("preset", None)
    if name not in PRESETS:
        raise ConfigError(f"unknown preset {name!r}; available: {sorted(PRESETS)}")
    base = PRESETS[name].to_dict()
    base.update(model)
    try:
        return PhysicalParams.from_dict(base)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid model parameters: {exc}") from exc


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return '"' + value.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_fmt(v) for v in value) + "]"
    if hasattr(value, "tolist"):
        return _fmt(value.tolist())
    if isinstance(value, float):
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def dump_config(cfg: dict) -> str:
    """Serialize ``{section: {key: value}}`` back to TOML text."""
    lines = []
    for section, values in cfg.items():
        lines.append(f"[{section}]")
        lines += [f"{k} = {_fmt(v)}" for k, v in values.items()]
        lines.append("")
    return "\n".join(lines)
