"""LPV model predictive control with an RK4 predictor.

For a given scheduling trajectory the RK4 predictor is linear in the
state and input, so the finite-horizon tracking problem condenses into a
dense QP over the input sequence alone. The closed loop refreshes the
scheduling trajectory from the nonlinear predictor after every solve and
shifts it one sample forward.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np

from .errors import Infeasible, SchedulingOutOfRange
from .integrators import discretize_ltv, rk4_step, simulate_plant
from .lpv import SchedulingBox, lpv_matrices, scheduling_map
from .model import PAPER_2024, PhysicalParams, nonlinear_dynamics
from .qp import QpProblem, QpStatus, solve_qp

NX = 4

X_MAX_DEFAULT = (math.inf, math.pi / 3, 10 * math.pi, 2 * math.pi)
U_MAX_DEFAULT = 1.5


@dataclass
class MpcConfig:
    Q: np.ndarray = field(default_factory=lambda: np.diag([200.0, 1.0, 0.1, 0.1]))
    R: float = 1000.0
    P_term: np.ndarray | None = None
    N: int = 20
    ts: float = 0.05
    x_min: np.ndarray = field(default_factory=lambda: -np.array(X_MAX_DEFAULT))
    x_max: np.ndarray = field(default_factory=lambda: np.array(X_MAX_DEFAULT))
    u_min: float = -U_MAX_DEFAULT
    u_max: float = U_MAX_DEFAULT
    terminal_constraint: bool = False
    params: PhysicalParams = PAPER_2024
    box: SchedulingBox = field(default_factory=SchedulingBox)
    box_margin: float = 0.1

    def __post_init__(self):
        self.Q = np.asarray(self.Q, dtype=float)
        self.x_min = np.asarray(self.x_min, dtype=float)
        self.x_max = np.asarray(self.x_max, dtype=float)
        if self.P_term is None:
            self.P_term = np.zeros((NX, NX))
        self.P_term = np.asarray(self.P_term, dtype=float)
        if self.N < 1 or self.ts <= 0 or self.R <= 0:
            raise ValueError("need N >= 1, ts > 0 and R > 0")
        if np.any(self.x_min >= self.x_max) or self.u_min >= self.u_max:
            raise ValueError("lower bounds must lie below upper bounds")

    @property
    def terminal_weight(self) -> np.ndarray:
        # with the terminal equality active the terminal cost is zero
        return np.zeros((NX, NX)) if self.terminal_constraint else self.P_term


@dataclass
class CondensedQp(QpProblem):
    """QP in the input sequence plus the affine state predictor.

    Predicted states are ``x_pred[i] = free[i] + Gamma[i] @ z``; the full
    tracking cost is ``objective(z) + constant``.
    """

    Gamma: np.ndarray = None
    free: np.ndarray = None
    constant: float = 0.0

    def predict(self, z) -> np.ndarray:
        return self.free + self.Gamma @ np.asarray(z, dtype=float)

    def cost(self, z) -> float:
        return self.objective(z) + self.constant


class MpcStepResult(NamedTuple):
    u_seq: np.ndarray
    x_pred: np.ndarray
    cost: float
    qp_status: QpStatus
    solve_time: float
    qp_iterations: int


def ltv_sequence(rho_traj, config: MpcConfig):
    """Per-step ``(A_d, B_d)`` for nodes ``0..N-1``."""
    mats = lpv_matrices(np.asarray(rho_traj, dtype=float)[: config.N], config.params)
    A_d, B_d, _ = discretize_ltv(mats, config.ts)
    return A_d, B_d


def build_condensed_qp(rho_traj, x_k, x_ref, config: MpcConfig) -> CondensedQp:
    rho_traj = np.asarray(rho_traj, dtype=float)
    x_k = np.asarray(x_k, dtype=float)
    x_ref = np.asarray(x_ref, dtype=float)
    N = config.N
    if rho_traj.shape != (N + 1, 2) or x_ref.shape != (N + 1, NX):
        raise ValueError("rho_traj must be (N+1, 2) and x_ref (N+1, 4)")
    box = config.box.inflated(config.box_margin)
    inside = box.contains(rho_traj)
    if not np.all(inside):
        i = int(np.argmin(inside))
        raise SchedulingOutOfRange(f"scheduling node {i} = {rho_traj[i]} outside {box}")

    A_d, B_d = ltv_sequence(rho_traj, config)
    Gamma = np.zeros((N + 1, NX, N))
    free = np.zeros((N + 1, NX))
    free[0] = x_k
    for i in range(N):
        Gamma[i + 1] = A_d[i] @ Gamma[i]
        Gamma[i + 1, :, i] = B_d[i, :, 0]
        free[i + 1] = A_d[i] @ free[i]

    W = np.empty((N + 1, NX, NX))
    W[:N] = config.Q
    W[N] = config.terminal_weight
    err = free - x_ref
    WG = W @ Gamma
    H = 2.0 * (np.einsum("kij,kil->jl", Gamma, WG) + config.R * np.eye(N))
    H = 0.5 * (H + H.T)
    g = 2.0 * np.einsum("ki,kij->j", err, WG)
    constant = float(np.einsum("ki,kij,kj->", err, W, err))

    rows, rhs = [], []
    for bound, sign in ((config.x_max, 1.0), (config.x_min, -1.0)):
        for j in np.flatnonzero(np.isfinite(bound)):
            rows.append(sign * Gamma[1:, j, :])
            rhs.append(sign * (bound[j] - free[1:, j]))
    rows += [np.eye(N), -np.eye(N)]
    rhs += [np.full(N, config.u_max), np.full(N, -config.u_min)]
    G = np.vstack(rows)
    h = np.concatenate(rhs)

    A_eq = b_eq = None
    if config.terminal_constraint:
        A_eq = Gamma[N]
        b_eq = x_ref[N] - free[N]
    return CondensedQp(H, g, G, h, A_eq, b_eq, Gamma=Gamma, free=free, constant=constant)


def mpc_step(x_k, rho_traj, x_ref, config: MpcConfig, warm_start=None) -> MpcStepResult:
    """Solve one horizon; raises ``Infeasible`` when the QP has no solution."""
    qp = build_condensed_qp(rho_traj, x_k, x_ref, config)
    sol = solve_qp(qp, warm_start=warm_start)
    if sol.status is QpStatus.INFEASIBLE:
        raise Infeasible("MPC problem infeasible",
                         {"x_k": np.asarray(x_k, dtype=float).copy(), "iterations": sol.iterations})
    if sol.status is not QpStatus.OPTIMAL:
        raise Infeasible(f"QP stopped with status {sol.status.value}",
                         {"x_k": np.asarray(x_k, dtype=float).copy(), "iterations": sol.iterations})
    u = sol.z_star
    return MpcStepResult(u, qp.predict(u), qp.cost(u), sol.status, sol.solve_time, sol.iterations)


def update_scheduling(x_k, u_seq, config: MpcConfig) -> np.ndarray:
    """Scheduling trajectory from the nonlinear RK4 predictor, shape (N+1, 2)."""
    u_seq = np.asarray(u_seq, dtype=float)
    if u_seq.shape[0] != config.N:
        raise ValueError("u_seq must hold N inputs")
    f = lambda x, u: nonlinear_dynamics(x, u, config.params)
    x = np.asarray(x_k, dtype=float)
    rho = np.empty((config.N + 1, 2))
    rho[0] = x[[1, 3]]
    for i, u in enumerate(u_seq):
        x = rk4_step(f, x, u, config.ts)
        rho[i + 1] = x[[1, 3]]
    return rho


def shift_scheduling(prev) -> np.ndarray:
    """Drop node 0 and hold the last node."""
    prev = np.asarray(prev, dtype=float)
    return np.vstack([prev[1:], prev[-1:]])


class LpvMpcController:
    """Receding-horizon controller for one plane.

    Owns its scheduling trajectory and the shifted previous solution used
    as QP warm start; independent instances share nothing.
    """

    def __init__(self, config: MpcConfig, refresh_scheduling: bool = True):
        self.config = config
        self.refresh_scheduling = refresh_scheduling
        self.rho = None
        self.warm = None

    def reset(self, x0):
        rho0 = np.asarray(scheduling_map(np.asarray(x0, dtype=float)), dtype=float)
        self.rho = np.tile(rho0, (self.config.N + 1, 1))
        self.warm = None

    def step(self, x_k, x_ref) -> MpcStepResult:
        if self.rho is None:
            self.reset(x_k)
        res = mpc_step(x_k, self.rho, x_ref, self.config, warm_start=self.warm)
        predicted = update_scheduling(x_k, res.u_seq, self.config) if self.refresh_scheduling else self.rho
        self.rho = shift_scheduling(predicted)
        self.warm = np.append(res.u_seq[1:], 0.0)
        return res


@dataclass
class Trajectory:
    t: np.ndarray
    x: np.ndarray
    u: np.ndarray
    J: np.ndarray
    solve_time: np.ndarray
    feasible: np.ndarray
    terminal_residual: np.ndarray = None
    x_pred1: np.ndarray = None

    def __len__(self):
        return self.t.size


def reference_preview(ref_signal: Callable, t: float, config: MpcConfig, t_end: float) -> np.ndarray:
    """Stage references ``(phi_ref, 0, 0, 0)`` over the horizon, held after ``t_end``."""
    times = np.minimum(t + config.ts * np.arange(config.N + 1), t_end)
    ref = np.zeros((config.N + 1, NX))
    ref[:, 0] = [ref_signal(s) for s in times]
    return ref


def closed_loop(x0, ref_signal: Callable, config: MpcConfig, T_end: float,
                plant: str = "ode", controller: LpvMpcController | None = None) -> Trajectory:
    """Run the receding-horizon loop on ``t = 0, ts, ..., T_end``.

    ``plant="ode"`` integrates the nonlinear model with the adaptive
    integrator. ``plant="predictor"`` instead advances with the QP's own
    frozen-scheduling predictor and skips the scheduling refresh, which
    makes the shifted previous solution exactly feasible at the next step.

    Every grid point gets a solve, so row ``k`` holds the state and the
    input computed from it; the input at ``T_end`` is not applied.

    Raises
    ------
    Infeasible
        With ``diagnostics["trajectory"]`` holding the rows recorded so far.
    """
    if plant not in ("ode", "predictor"):
        raise ValueError("plant must be 'ode' or 'predictor'")
    ts = config.ts
    n_steps = int(round(T_end / ts))
    if controller is None:
        controller = LpvMpcController(config, refresh_scheduling=(plant == "ode"))
    x = np.asarray(x0, dtype=float).copy()
    controller.reset(x)
    rows = {k: [] for k in ("t", "x", "u", "J", "solve_time", "feasible", "term", "xp1")}
    for k in range(n_steps + 1):
        t = k * ts
        x_ref = reference_preview(ref_signal, t, config, T_end)
        try:
            res = controller.step(x, x_ref)
        except Infeasible as exc:
            exc.diagnostics.update(k=k, t=t, trajectory=_trajectory(rows))
            raise
        rows["t"].append(t)
        rows["x"].append(x.copy())
        rows["u"].append(res.u_seq[0])
        rows["J"].append(res.cost)
        rows["solve_time"].append(res.solve_time)
        rows["feasible"].append(True)
        rows["term"].append(float(np.abs(res.x_pred[-1] - x_ref[-1]).max()))
        rows["xp1"].append(res.x_pred[1])
        if k == n_steps:
            break
        if plant == "ode":
            x = simulate_plant(x, res.u_seq[0], ts, config.params)
        else:
            x = res.x_pred[1].copy()
    return _trajectory(rows)


def _trajectory(rows) -> Trajectory:
    return Trajectory(
        t=np.array(rows["t"]), x=np.array(rows["x"]).reshape(-1, NX), u=np.array(rows["u"]),
        J=np.array(rows["J"]), solve_time=np.array(rows["solve_time"]),
        feasible=np.array(rows["feasible"], dtype=bool),
        terminal_residual=np.array(rows["term"]), x_pred1=np.array(rows["xp1"]).reshape(-1, NX),
    )
