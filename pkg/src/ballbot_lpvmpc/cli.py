"""Command-line front end.

Exit codes: 0 success, 2 infeasible QP, 3 numerical failure, 4 config error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import dump_config, load_config, params_from_config
from .errors import BallbotError, ConfigError, Infeasible
from .lpv import SchedulingBox
from .records import write_residual_history
from .refine import DEFAULT_B0, Geometry, LinearParams, PAPER_P, newton_refine
from .scenarios import compare_models, default_scenario, mpc_config_for, run_scenario
from .synthesis import hurwitz_grid_check, lqr_for_mpc

log = logging.getLogger("ballbot_lpvmpc")

EXIT_OK, EXIT_INFEASIBLE, EXIT_NUMERICAL, EXIT_CONFIG = 0, 2, 3, 4


def _load(args) -> dict:
    return load_config(args.config) if args.config else {}


def cmd_refine(args) -> int:
    cfg = _load(args)
    params = params_from_config(cfg, args.preset)
    section = cfg.get("refine", {})
    try:
        p = LinearParams(*section["p"]) if "p" in section else PAPER_P
    except TypeError as exc:
        raise ConfigError(f"refine.p needs 6 entries: {exc}") from exc
    b0 = section.get("b0", DEFAULT_B0)
    if len(b0) != 4:
        raise ConfigError("refine.b0 needs 4 entries")
    res = newton_refine(b0, p, Geometry(params.ell, params.r_b, params.r_w, params.g),
                        tol=section.get("tol", 1e-9), max_iter=section.get("max_iter", 50))
    report = {
        "b_star": res.b_star.tolist(), "residual_norm": res.residual_norm,
        "iterations": res.iterations, "converged": res.converged,
        "residual_history": res.residual_history,
    }
    print(json.dumps(report, indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "refine_result.json").write_text(json.dumps(report, indent=2))
        write_residual_history(res.residual_history, out / "residual_history.csv")
        b1, b2, b3, b4 = res.b_star.tolist()
        (out / "refined_model.toml").write_text(dump_config({"model": {
            "preset": args.preset or cfg.get("model", {}).get("preset", "paper-2024"),
            "b1": b1, "b2": b2, "b3": b3, "b4": b4}}))
    return EXIT_OK


def cmd_synthesize(args) -> int:
    cfg = _load(args)
    params = params_from_config(cfg, args.preset)
    spec = _scenario_spec(args, cfg, args.scenario)
    Q = np.diag(spec.q_diag)
    sol = lqr_for_mpc(params, Q, spec.R, spec.ts, discrete=(args.terminal == "dare"))
    cert = hurwitz_grid_check(sol.K, params, SchedulingBox(), args.grid, spec.ts)
    report = {
        "P": sol.P.tolist(), "K": sol.K.tolist(), "riccati_residual": sol.residual,
        "certificate": {"n_grid": cert.n_grid, "worst_spectral_radius": cert.worst_radius,
                        "worst_rho": list(cert.worst_rho), "pass": cert.passed},
    }
    print(json.dumps(report, indent=2))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        mpc = dict(cfg.get("mpc", {}))
        mpc.update(P=sol.P.tolist(), K=sol.K.tolist())
        merged = {**cfg, "mpc": mpc}
        (out / "synthesis.toml").write_text(dump_config(merged))
    return EXIT_OK if cert.passed else EXIT_NUMERICAL


def cmd_simulate(args) -> int:
    cfg = _load(args)
    params = params_from_config(cfg, args.preset)
    res = compare_models(params, duration=args.duration, ts=args.ts)
    out = Path(args.out or ".")
    out.mkdir(parents=True, exist_ok=True)
    path = out / "model_comparison.csv"
    names = ("nonlinear", "lpv", "linear", "rk4")
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{m}_{c}" for m in names for c in ("phi", "theta", "phidot", "thetadot", "tau")])
        for k, t in enumerate(res["t"]):
            row = [t]
            for m in names:
                x, u = res[m]
                row += [*x[k], u[k]]
            w.writerow([f"{v:.17g}" for v in row])
    print(f"wrote {path}")
    return EXIT_OK


def _scenario_spec(args, cfg, name):
    spec = default_scenario(name)
    mpc = cfg.get("mpc", {})
    changes = {}
    for key, attr in (("N", "N"), ("ts", "ts"), ("R", "R"), ("u_max", "u_max")):
        if key in mpc:
            changes[attr] = mpc[key]
    if "Q" in mpc:
        changes["q_diag"] = tuple(mpc["Q"])
    if "x_max" in mpc:
        changes["x_max"] = tuple(float(v) for v in mpc["x_max"])
    if "guarantees" in mpc:
        changes["guarantees"] = bool(mpc["guarantees"])
    if "duration" in cfg.get("scenario", {}):
        changes["duration"] = float(cfg["scenario"]["duration"])
    if getattr(args, "ts", None) is not None:
        changes["ts"] = args.ts
    if getattr(args, "horizon", None) is not None:
        changes["N"] = args.horizon
    if getattr(args, "guarantees", False):
        changes["guarantees"] = True
    if getattr(args, "duration", None) is not None and name is not None and args.command == "scenario":
        changes["duration"] = args.duration
    try:
        return replace(spec, **changes)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def cmd_scenario(args) -> int:
    cfg = _load(args)
    params = params_from_config(cfg, args.preset)
    spec = _scenario_spec(args, cfg, args.name)
    mpc = cfg.get("mpc", {})
    P = np.asarray(mpc["P"], dtype=float) if "P" in mpc else None
    if P is not None and P.shape != (4, 4):
        raise ConfigError("mpc.P must be a 4x4 nested list")
    config = mpc_config_for(spec, params, P_term=P, terminal=mpc.get("terminal", "dare"))
    out = Path(args.out or ".")
    try:
        run_scenario(spec, out, config)
    except Infeasible as exc:
        diag = {k: v for k, v in exc.diagnostics.items() if k != "trajectory"}
        log.error("infeasible QP: %s %s", exc, diag)
        return EXIT_INFEASIBLE
    print(json.dumps(json.loads((out / f"{spec.name}_timing.json").read_text()), indent=2))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ballbot-mpc", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="TOML configuration file")
        p.add_argument("--preset", help="named parameter preset (default paper-2024)")
        p.add_argument("--out", help="output directory")

    p = sub.add_parser("refine", help="recover b from linearized-model parameters")
    common(p)
    p.set_defaults(func=cmd_refine)

    p = sub.add_parser("synthesize", help="LQR terminal weight, gain and grid certificate")
    common(p)
    p.add_argument("--scenario", default="s1", choices=("s1", "s2", "s3"),
                   help="scenario whose weights are used")
    p.add_argument("--ts", type=float)
    p.add_argument("--terminal", default="dare", choices=("dare", "care"))
    p.add_argument("--grid", type=int, default=51)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("simulate", help="open-loop multiharmonic model comparison")
    common(p)
    p.add_argument("--ts", type=float, default=0.05)
    p.add_argument("--duration", type=float, default=10.0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("scenario", help="run a tracking scenario")
    common(p)
    p.add_argument("name", choices=("s1", "s2", "s3"))
    p.add_argument("--ts", type=float)
    p.add_argument("--horizon", type=int)
    p.add_argument("--duration", type=float)
    p.add_argument("--guarantees", action="store_true", help="enable the terminal equality constraint")
    p.set_defaults(func=cmd_scenario)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        log.error("config error: %s", exc)
        return EXIT_CONFIG
    except Infeasible as exc:
        log.error("infeasible: %s", exc)
        return EXIT_INFEASIBLE
    except BallbotError as exc:
        log.error("numerical failure: %s: %s", type(exc).__name__, exc)
        return EXIT_NUMERICAL
    except OSError as exc:
        log.error("I/O failure: %s", exc)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
