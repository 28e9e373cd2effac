"""Acceptance gate: one test per criterion, each printing a verdict line."""
import math
import time

import numpy as np

from ballbot_lpvmpc.integrators import rk4_step, simulate_plant
from ballbot_lpvmpc.lpv import lpv_dynamics_given_rho, lpv_matrices, scheduling_map
from ballbot_lpvmpc.model import PAPER_2024, nonlinear_dynamics
from ballbot_lpvmpc.mpc import MpcConfig, build_condensed_qp
from ballbot_lpvmpc.qp import QpStatus, kkt_residuals, solve_qp
from ballbot_lpvmpc.refine import (DEFAULT_B0, PAPER_P, Geometry, LinearParams, h_functions,
                                   newton_refine)
from ballbot_lpvmpc.synthesis import hurwitz_grid_check, lqr_for_mpc, solve_dare

P = PAPER_2024
TWO_PI = 2 * math.pi
B_TABLE = np.array([0.002483, 0.059325, 0.143093, -0.07436])
THETA_MAX, PHIDOT_MAX, THETADOT_MAX, U_MAX = math.pi / 3, 10 * math.pi, 2 * math.pi, 1.5


def constraint_violation(traj):
    """Largest excess over the state and input box along a trajectory."""
    x, u = traj.x, traj.u
    return max(np.abs(x[:, 1]).max() - THETA_MAX, np.abs(x[:, 2]).max() - PHIDOT_MAX,
               np.abs(x[:, 3]).max() - THETADOT_MAX, np.abs(u).max() - U_MAX)


def test_criterion_01_embedding_equivalence(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    n = 100_000
    x = np.column_stack([rng.uniform(-20, 20, n), rng.uniform(-THETA_MAX, THETA_MAX, n),
                         rng.uniform(-PHIDOT_MAX, PHIDOT_MAX, n),
                         rng.uniform(-THETADOT_MAX, THETADOT_MAX, n)])
    u = rng.uniform(-U_MAX, U_MAX, n)
    f_nl = nonlinear_dynamics(x, u, P)
    f_lpv = lpv_dynamics_given_rho(scheduling_map(x), x, u, P)
    worst = float((np.abs(f_lpv - f_nl).max(axis=1) / (1.0 + np.abs(f_nl).max(axis=1))).max())
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-10 and elapsed < 5.0
    report(1, ok, f"embedding max normalized discrepancy {worst:.3e} (<= 1e-10), {elapsed:.2f} s")
    assert ok


def test_criterion_02_parameter_refinement(report):
    t0 = time.perf_counter()
    res = newton_refine(DEFAULT_B0, PAPER_P, Geometry())
    b_err = float(np.abs(res.b_star - B_TABLE).max())
    # consistent data generated from the identified constants
    b_true = B_TABLE
    synth = newton_refine(DEFAULT_B0, LinearParams(*h_functions(b_true, Geometry())), Geometry(),
                          tol=1e-14)
    elapsed = time.perf_counter() - t0
    ok = (abs(res.residual_norm - 0.4330) <= 0.01 and res.iterations <= 10 and b_err <= 1e-3
          and synth.residual_norm < 1e-8 and elapsed < 1.0)
    report(2, ok, f"refine residual {res.residual_norm:.5f} in {res.iterations} it, "
                  f"max |b - b_table| {b_err:.2e}, synthetic residual {synth.residual_norm:.1e}, "
                  f"{elapsed:.2f} s")
    assert ok


def test_criterion_03_linearization_cross_check(report):
    A, B = lpv_matrices((0.0, 0.0), P)
    ours = np.array([A[2, 1], A[2, 2], B[2, 0], A[3, 1], A[3, 2]])
    dev = np.abs(ours - PAPER_P.as_array()[:5])
    ok = bool(np.all(dev <= 0.5))
    report(3, ok, f"origin linearization deviations p1..p5 {np.array2string(dev, precision=3)} (<= 0.5)")
    assert ok


def test_criterion_04_qp_against_grid(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(4)
    Q = np.diag([200.0, 1.0, 0.1, 0.1])
    config = MpcConfig(Q=Q, R=1000.0, P_term=lqr_for_mpc(P, Q, 1000.0, 0.05).P, N=2)
    W = [config.Q, config.Q, config.terminal_weight]
    grid = np.arange(-1.5, 1.5 + 1e-9, 0.005)
    U = np.stack(np.meshgrid(grid, grid, indexing="ij"), axis=-1).reshape(-1, 2)
    worst_u = worst_c = worst_kkt = 0.0
    for _ in range(100):
        x_k = np.array([rng.uniform(-1, 1), rng.uniform(-0.3, 0.3), rng.uniform(-1, 1),
                        rng.uniform(-1, 1)])
        rho = np.column_stack([rng.uniform(-0.5, 0.5, 3), rng.uniform(-2, 2, 3)])
        x_ref = np.zeros((3, 4))
        x_ref[:, 0] = rng.uniform(-TWO_PI, TWO_PI)
        qp = build_condensed_qp(rho, x_k, x_ref, config)
        sol = solve_qp(qp)
        assert sol.status is QpStatus.OPTIMAL
        res = kkt_residuals(qp, sol.z_star, sol.lam, sol.nu)
        worst_kkt = max(worst_kkt, *res.values())
        X = qp.free[None] + np.einsum("kin,mn->mki", qp.Gamma, U)
        cost = config.R * (U**2).sum(axis=1)
        for i in range(3):
            e = X[:, i] - x_ref[i]
            cost += np.einsum("mi,ij,mj->m", e, W[i], e)
        feasible = np.all((X[:, 1:] <= config.x_max) & (X[:, 1:] >= config.x_min), axis=(1, 2))
        cost[~feasible] = np.inf
        best = int(np.argmin(cost))
        qp_cost = qp.cost(sol.z_star)
        worst_u = max(worst_u, float(np.abs(U[best] - sol.z_star).max()))
        worst_c = max(worst_c, (cost[best] - qp_cost) / abs(qp_cost))
    elapsed = time.perf_counter() - t0
    ok = worst_u <= 2e-2 and worst_c <= 1e-3 and worst_kkt <= 1e-6 and elapsed < 30
    report(4, ok, f"QP vs grid: max input gap {worst_u:.2e}, max rel cost gap {worst_c:.1e}, "
                  f"max KKT residual {worst_kkt:.1e}, {elapsed:.1f} s")
    assert ok


def test_criterion_05_scenario_1(report, scenario_runs):
    _, _, trajs, elapsed = scenario_runs("s1")
    traj = trajs["y"]
    t, phi = traj.t, traj.x[:, 0]
    reach = np.flatnonzero((t >= 1.0) & (np.abs(phi - TWO_PI) < 0.1))
    t_reach = float(t[reach[0]]) if reach.size else math.inf
    hold = (t >= 2.0 - 1e-9) & (t <= 2.9 + 1e-9)
    hold_dev = float(np.abs(phi[hold] - TWO_PI).max())
    final = float(abs(phi[-1]))
    viol = constraint_violation(traj)
    ok = t_reach <= 1.6 and hold_dev < 0.05 and final < 0.05 and viol <= 0 and elapsed < 10
    report(5, ok, f"s1: reaches 2pi+-0.1 at {t_reach:.2f} s, hold dev on [2.0,2.9] {hold_dev:.3f} "
                  f"(< 0.05), |phi(4)| {final:.4f}, bound excess {viol:.3f}, {elapsed:.1f} s")
    assert ok


def test_criterion_06_scenario_2(report, scenario_runs):
    _, _, trajs, elapsed = scenario_runs("s2")
    xz, yz = trajs["xz"], trajs["yz"]
    window = xz.t >= 10.0 - 1e-9
    t = xz.t[window]
    ref_x = 0.12 * TWO_PI * np.sin(0.3 * t)
    ref_y = 0.12 * TWO_PI * np.sin(0.4 * t)
    err = np.hypot(0.12 * xz.x[window, 0] - ref_x, 0.12 * yz.x[window, 0] - ref_y)
    rms = float(np.sqrt(np.mean(err**2)))
    viol = max(constraint_violation(xz), constraint_violation(yz))
    ok = rms < 0.05 and viol <= 0 and elapsed < 60
    report(6, ok, f"s2: RMS (X,Y) error on [10,70] s {rms:.5f} m (< 0.05), bound excess {viol:.3f}, "
                  f"{elapsed:.1f} s")
    assert ok


def test_criterion_07_scenario_3(report, scenario_runs):
    from ballbot_lpvmpc.mpc import closed_loop
    spec, config, trajs, elapsed = scenario_runs("s3")
    traj = trajs["y"]
    feasible = bool(traj.feasible.all()) and len(traj) == round(spec.duration / spec.ts) + 1
    term = float(traj.terminal_residual.max())
    late = traj.t >= 4.0 - 1e-9
    settle = float(np.abs(traj.x[late, 0] - math.pi).max())
    rise = float(np.diff(traj.J).max())
    shadow = closed_loop(np.zeros(4), lambda t: math.pi, config, spec.duration, plant="predictor")
    rise_pred = float(np.diff(shadow.J).max())
    viol = constraint_violation(traj)
    ok = (feasible and term <= 1e-6 and settle < 1e-3 and rise <= 1e-6 and rise_pred <= 1e-6
          and viol <= 0 and elapsed < 10)
    report(7, ok, f"s3: all feasible {feasible}, terminal residual {term:.1e}, |phi - pi| after 4 s "
                  f"{settle:.1e}, max cost increase {rise:.1e} (predictor plant {rise_pred:.1e}), "
                  f"{elapsed:.1f} s")
    assert ok


def test_criterion_08_dare_and_certificate(report):
    t0 = time.perf_counter()
    scalar = solve_dare([[0.5]], [[1.0]], [[1.0]], [[1.0]])
    Q = np.diag([200.0, 1.0, 0.1, 0.1])
    sol = lqr_for_mpc(P, Q, 1000.0, 0.05)
    cert = hurwitz_grid_check(sol.K, P, n_grid=51, ts=0.05)
    elapsed = time.perf_counter() - t0
    ok = (abs(scalar.P[0, 0] - 1.13278) <= 1e-5 and sol.residual <= 1e-8 and cert.passed
          and elapsed < 5)
    report(8, ok, f"scalar P {scalar.P[0, 0]:.6f}, ballbot DARE residual {sol.residual:.1e}, "
                  f"51x51 certificate worst radius {cert.worst_radius:.4f}, {elapsed:.2f} s")
    assert ok


def test_criterion_09_real_time(report, scenario_runs):
    from ballbot_lpvmpc.records import timing_stats
    means = {}
    for name in ("s1", "s2", "s3"):
        spec, _, trajs, _ = scenario_runs(name)
        times = np.concatenate([t.solve_time for t in trajs.values()])
        means[name] = timing_stats(times)
    ok = all(s.mean < 0.05 for s in means.values())
    text = ", ".join(f"{k} mean {v.mean * 1e3:.2f} ms (std {v.std * 1e3:.2f}, max {v.max * 1e3:.1f})"
                     for k, v in means.items())
    report(9, ok, f"QP solve times: {text}; bound ts = 50 ms")
    assert ok


def _rk4_errors(steps, x0, T):
    ref = np.asarray(x0, dtype=float)
    for _ in range(10):
        ref = simulate_plant(ref, 0.0, T / 10, P, rtol=1e-13, atol=1e-14)
    f = lambda y, u: nonlinear_dynamics(y, u, P)
    errs = []
    for ts in steps:
        x = np.asarray(x0, dtype=float)
        for _ in range(round(T / ts)):
            x = rk4_step(f, x, 0.0, ts)
        errs.append(float(np.abs(x - ref).max()))
    return errs


def test_criterion_10_rk4_order(report):
    t0 = time.perf_counter()
    steps = (0.05, 0.025, 0.0125)
    errs = _rk4_errors(steps, (0.0, 0.05, 0.0, 0.0), 0.5)
    slope = float(np.polyfit(np.log(steps), np.log(errs), 1)[0])
    elapsed = time.perf_counter() - t0
    ok = abs(slope - 4.0) <= 0.3 and elapsed < 5
    report(10, ok, f"RK4 log-log slope {slope:.2f} over ts {steps} (4 +- 0.3), "
                   f"errors {', '.join(f'{e:.1e}' for e in errs)}, {elapsed:.2f} s")
    assert ok
