"""Reference-tracking scenarios and the open-loop model comparison."""
from __future__ import annotations

import bisect
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .integrators import rk4_step, simulate_plant
from .lpv import lpv_dynamics
from .model import PAPER_2024, PhysicalParams, nonlinear_dynamics
from .mpc import MpcConfig, closed_loop, X_MAX_DEFAULT, U_MAX_DEFAULT
from .records import timing_stats, write_trajectory_csv
from .synthesis import linearize_at_origin, lqr_for_mpc

TWO_PI = 2 * math.pi


def scenario_1_reference(t: float) -> float:
    """0 before 1 s, one full ball revolution until 3 s, back to 0 after."""
    return TWO_PI if 1.0 <= t < 3.0 else 0.0


def scenario_2_reference(t: float) -> tuple[float, float]:
    """Lissajous reference in ball angle; multiply by ``r_b`` for metres."""
    return TWO_PI * math.sin(0.3 * t), TWO_PI * math.sin(0.4 * t)


def scenario_3_reference(t: float) -> float:
    return math.pi


def piecewise_constant(breakpoints, values):
    """Right-continuous step function; ``values`` has one more entry than
    ``breakpoints``."""
    breakpoints = list(breakpoints)
    values = list(values)
    if len(values) != len(breakpoints) + 1:
        raise ValueError("need len(values) == len(breakpoints) + 1")
    if any(b1 >= b2 for b1, b2 in zip(breakpoints, breakpoints[1:])):
        raise ValueError("breakpoints must be strictly increasing")
    return lambda t: values[bisect.bisect_right(breakpoints, t)]


@dataclass
class ScenarioSpec:
    name: str
    duration: float
    references: dict  # plane name -> callable t -> phi_ref
    q_diag: tuple = (200.0, 1.0, 0.1, 0.1)
    R: float = 1000.0
    ts: float = 0.05
    N: int = 20
    guarantees: bool = False
    x_max: tuple = X_MAX_DEFAULT
    u_max: float = U_MAX_DEFAULT
    x0: tuple = (0.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        if self.duration <= 0:
            raise ValueError("duration must be positive")


def default_scenario(name: str) -> ScenarioSpec:
    if name == "s1":
        return ScenarioSpec("s1", 4.0, {"y": scenario_1_reference})
    if name == "s2":
        return ScenarioSpec(
            "s2", 70.0,
            {"xz": lambda t: scenario_2_reference(t)[0], "yz": lambda t: scenario_2_reference(t)[1]},
            q_diag=(1000.0, 1.0, 0.1, 0.1))
    if name == "s3":
        return ScenarioSpec("s3", 5.0, {"y": scenario_3_reference}, guarantees=True)
    raise ConfigError(f"unknown scenario {name!r}")


def mpc_config_for(spec: ScenarioSpec, params: PhysicalParams = PAPER_2024,
                   P_term=None, terminal: str = "dare") -> MpcConfig:
    """MPC settings for a scenario; the terminal weight defaults to the
    Riccati solution on the origin linearization with the same weights."""
    Q = np.diag(spec.q_diag)
    if P_term is None:
        if terminal not in ("dare", "care"):
            raise ConfigError("terminal must be 'dare' or 'care'")
        P_term = lqr_for_mpc(params, Q, spec.R, spec.ts, discrete=(terminal == "dare")).P
    x_max = np.asarray(spec.x_max, dtype=float)
    return MpcConfig(Q=Q, R=spec.R, P_term=P_term, N=spec.N, ts=spec.ts,
                     x_min=-x_max, x_max=x_max, u_min=-spec.u_max, u_max=spec.u_max,
                     terminal_constraint=spec.guarantees, params=params)


def run_planes(spec: ScenarioSpec, config: MpcConfig, concurrent: bool = True) -> dict:
    """Closed loop for each plane; planes share nothing and may run in parallel."""
    def run(item):
        plane, ref = item
        return plane, closed_loop(np.asarray(spec.x0, dtype=float), ref, config, spec.duration)

    items = list(spec.references.items())
    if concurrent and len(items) > 1:
        with ThreadPoolExecutor(max_workers=len(items)) as pool:
            results = list(pool.map(run, items))
    else:
        results = [run(it) for it in items]
    return dict(results)


def run_scenario(spec: ScenarioSpec, out_dir, config: MpcConfig | None = None,
                 concurrent: bool = True) -> dict:
    """Run a scenario and write one CSV per plane plus ``<name>_timing.json``.

    Returns the trajectories keyed by plane.
    """
    if config is None:
        config = mpc_config_for(spec)
    trajectories = run_planes(spec, config, concurrent)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {"scenario": spec.name, "ts": spec.ts, "N": spec.N, "planes": {}}
    for plane, traj in trajectories.items():
        suffix = f"_{plane}" if len(trajectories) > 1 else ""
        write_trajectory_csv(traj, out_dir / f"{spec.name}{suffix}.csv")
        summary["planes"][plane] = timing_stats(traj).as_dict()
    all_times = np.concatenate([t.solve_time for t in trajectories.values()])
    summary["all"] = timing_stats(all_times).as_dict()
    (out_dir / f"{spec.name}_timing.json").write_text(json.dumps(summary, indent=2))
    return trajectories


@dataclass
class Multiharmonic:
    """Sum of sines ``sum_i a_i sin(2 pi f_i t + phase_i)`` in N*m."""

    amplitudes: tuple = (0.1, 0.075, 0.05)
    frequencies: tuple = (0.3, 0.8, 1.7)
    phases: tuple = (0.0, 1.0, 2.0)

    def __call__(self, t: float) -> float:
        return float(sum(a * math.sin(2 * math.pi * f * t + p)
                         for a, f, p in zip(self.amplitudes, self.frequencies, self.phases)))


def compare_models(params: PhysicalParams = PAPER_2024, excitation=None, duration: float = 10.0,
                   ts: float = 0.05, q_diag=(200.0, 1.0, 0.1, 0.1), R: float = 1000.0) -> dict:
    """Sampled-data LQR loop with an additive multiharmonic input, applied to
    the nonlinear model, its LPV embedding, the origin linearization (all
    with the adaptive integrator) and the RK4 discretization.

    Each model closes its own loop ``u_k = -K x_k + excitation(t_k)``.
    Returns arrays ``t`` and per-model ``(x, u)``.
    """
    excitation = excitation or Multiharmonic()
    K = lqr_for_mpc(params, np.diag(q_diag), R, ts).K[0]
    A0, B0 = linearize_at_origin(params)
    linear = lambda x, u: A0 @ x + B0[:, 0] * u
    models = {
        "nonlinear": lambda x, u: simulate_plant(x, u, ts, params),
        "lpv": lambda x, u: _adaptive(lambda y: lpv_dynamics(y, u, params), x, ts),
        "linear": lambda x, u: _adaptive(lambda y: linear(y, u), x, ts),
        "rk4": lambda x, u: rk4_step(lambda y, v: nonlinear_dynamics(y, v, params), x, u, ts),
    }
    n = int(round(duration / ts))
    t = ts * np.arange(n + 1)
    out = {"t": t}
    for name, advance in models.items():
        x = np.zeros(4)
        xs, us = [x], []
        for k in range(n + 1):
            u = float(-K @ x + excitation(t[k]))
            us.append(u)
            if k < n:
                x = advance(x, u)
                xs.append(x)
        out[name] = (np.array(xs), np.array(us))
    return out


def _adaptive(f, x, ts):
    from scipy.integrate import solve_ivp
    from .integrators import PLANT_ATOL, PLANT_RTOL

    sol = solve_ivp(lambda t, y: f(y), (0.0, ts), x, method="RK45", rtol=PLANT_RTOL, atol=PLANT_ATOL)
    return sol.y[:, -1]
