"""Dense convex QP solver.

Solves ::

    minimize    0.5 z'Hz + g'z
    subject to  G z <= h,   A_eq z = b_eq

with a Mehrotra predictor-corrector primal-dual interior-point method.
Problems here are tiny (tens of variables), so every Newton system is
factored densely.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.optimize import linprog

from .errors import Infeasible

H_REG = 1e-10


class QpStatus(enum.Enum):
    OPTIMAL = "Optimal"
    INFEASIBLE = "Infeasible"
    MAX_ITER = "MaxIter"


@dataclass
class QpProblem:
    H: np.ndarray
    g: np.ndarray
    G: np.ndarray = None
    h: np.ndarray = None
    A_eq: np.ndarray = None
    b_eq: np.ndarray = None

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=float))
        n = self.H.shape[0]
        self.g = np.asarray(self.g, dtype=float).reshape(n)
        if self.G is None:
            self.G, self.h = np.zeros((0, n)), np.zeros(0)
        if self.A_eq is None:
            self.A_eq, self.b_eq = np.zeros((0, n)), np.zeros(0)
        self.G = np.asarray(self.G, dtype=float).reshape(-1, n)
        self.h = np.asarray(self.h, dtype=float).reshape(-1)
        self.A_eq = np.asarray(self.A_eq, dtype=float).reshape(-1, n)
        self.b_eq = np.asarray(self.b_eq, dtype=float).reshape(-1)
        if self.G.shape[0] != self.h.size or self.A_eq.shape[0] != self.b_eq.size:
            raise ValueError("constraint matrix / vector sizes disagree")
        if not np.allclose(self.H, self.H.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(self.H).max())):
            raise ValueError("H must be symmetric")

    @property
    def n(self) -> int:
        return self.H.shape[0]

    def objective(self, z) -> float:
        return float(0.5 * z @ self.H @ z + self.g @ z)


@dataclass
class QpSolution:
    z_star: np.ndarray
    objective: float
    status: QpStatus
    iterations: int
    solve_time: float
    lam: np.ndarray = field(default=None, repr=False)  # inequality multipliers
    nu: np.ndarray = field(default=None, repr=False)  # equality multipliers


def kkt_residuals(problem: QpProblem, z, lam, nu) -> dict:
    """Stationarity, primal feasibility, dual feasibility and complementarity."""
    p = problem
    stat = p.H @ z + p.g + p.G.T @ lam + p.A_eq.T @ nu
    slack = p.h - p.G @ z
    return {
        "stationarity": float(np.abs(stat).max(initial=0.0)),
        "primal_ineq": float(np.maximum(-slack, 0).max(initial=0.0)),
        "primal_eq": float(np.abs(p.A_eq @ z - p.b_eq).max(initial=0.0)),
        "dual": float(np.maximum(-lam, 0).max(initial=0.0)),
        "complementarity": float(np.abs(lam * slack).max(initial=0.0)),
    }


def _reduce_equalities(A, b, tol=1e-10):
    """Orthonormal row basis for ``A z = b``; raises Infeasible if inconsistent."""
    if A.shape[0] == 0:
        return A, b, np.zeros((0, 0))
    U, sv, Vt = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(sv > tol * max(1.0, sv[0])))
    U_r = U[:, :rank]
    # component of b outside range(A) certifies inconsistency
    outside = b - U_r @ (U_r.T @ b)
    if np.abs(outside).max() > 1e-9 * (1.0 + np.abs(b).max()):
        raise Infeasible("equality constraints are inconsistent",
                         {"inconsistency": float(np.abs(outside).max())})
    return U_r.T @ A, U_r.T @ b, U_r


def _max_step(v, dv):
    neg = dv < 0
    if not np.any(neg):
        return 1.0
    return min(1.0, float(np.min(-v[neg] / dv[neg])))


def _feasible_set_empty(p: QpProblem) -> bool:
    res = linprog(np.zeros(p.n), A_ub=p.G if p.G.size else None, b_ub=p.h if p.h.size else None,
                  A_eq=p.A_eq if p.A_eq.size else None, b_eq=p.b_eq if p.b_eq.size else None,
                  bounds=[(None, None)] * p.n, method="highs")
    return res.status == 2


def _polish(H, g, G, h, A, b, s, lam, dual_tol, primal_tol):
    """Exact solve on the active set guessed by the interior point.

    Returns ``(z, lam, nu)`` when the equality-constrained KKT solution is
    primal and dual feasible, otherwise ``None``.
    """
    n, q = H.shape[0], A.shape[0]
    active = lam > s
    Ga = G[active]
    ma = Ga.shape[0]
    K = np.zeros((n + ma + q, n + ma + q))
    K[:n, :n] = H
    K[:n, n:n + ma] = Ga.T
    K[:n, n + ma:] = A.T
    K[n:n + ma, :n] = Ga
    K[n + ma:, :n] = A
    sol = np.linalg.lstsq(K, np.concatenate([-g, h[active], b]), rcond=None)[0]
    z, lam_a, nu = sol[:n], sol[n:n + ma], sol[n + ma:]
    lam_new = np.zeros_like(lam)
    lam_new[active] = lam_a
    stat = H @ z + g + G.T @ lam_new + A.T @ nu
    if (np.all(np.isfinite(sol)) and np.abs(stat).max(initial=0.0) <= dual_tol
            and (G @ z - h).max(initial=0.0) <= primal_tol
            and np.abs(A @ z - b).max(initial=0.0) <= primal_tol
            and lam_a.min(initial=0.0) >= -dual_tol):
        return z, np.maximum(lam_new, 0.0), nu
    return None


def solve_qp(problem: QpProblem, warm_start=None, tol: float = 1e-8,
             max_iter: int = 200, raise_on_infeasible: bool = False) -> QpSolution:
    """Interior-point solve with KKT residuals driven below ``tol``.

    Residuals are measured on a copy of the problem whose objective is
    scaled to unit magnitude; multipliers are reported for the original.
    Infeasibility is confirmed with an LP feasibility check whenever the
    iteration fails to converge.
    """
    t0 = time.perf_counter()
    p = problem
    n = p.n
    finite = np.isfinite(p.h)
    G, h = p.G[finite], p.h[finite]
    try:
        A, b, U_r = _reduce_equalities(p.A_eq, p.b_eq)
    except Infeasible:
        if raise_on_infeasible:
            raise
        return QpSolution(np.full(n, np.nan), np.nan, QpStatus.INFEASIBLE, 0,
                          time.perf_counter() - t0)
    m, q = G.shape[0], A.shape[0]

    scale = max(1.0, np.abs(p.H).max(), np.abs(p.g).max(initial=0.0))
    H = p.H / scale
    g = p.g / scale
    reg = H_REG / scale  # factorization only; the objective stays exact

    # starting point
    if warm_start is not None:
        z = np.asarray(warm_start, dtype=float).reshape(n).copy()
    else:
        K0 = np.zeros((n + q, n + q))
        K0[:n, :n] = H + G.T @ G
        K0[:n, n:] = A.T
        K0[n:, :n] = A
        rhs = np.concatenate([-g + G.T @ h, b])
        z = np.linalg.lstsq(K0, rhs, rcond=None)[0][:n]
    s = h - G @ z
    if m:
        shift = -s.min()
        if shift >= -1.0:
            s = s + 1.0 + shift
    lam = np.ones(m)
    nu = np.zeros(q)

    status = QpStatus.MAX_ITER
    it = 0
    h_scale = 1.0 + np.abs(h).max(initial=0.0)
    best = np.inf
    stalled = 0
    for it in range(1, max_iter + 1):
        r_d = H @ z + g + G.T @ lam + A.T @ nu
        r_p = G @ z + s - h
        r_e = A @ z - b
        mu = float(s @ lam) / m if m else 0.0
        stat = np.abs(r_d).max(initial=0.0)
        comp = (s * lam).max(initial=0.0)
        prim = max(np.abs(r_p).max(initial=0.0), np.abs(r_e).max(initial=0.0))
        if prim <= tol * h_scale and max(stat, comp) * scale <= tol:
            status = QpStatus.OPTIMAL
            it -= 1
            break
        if prim <= tol * h_scale and max(stat, comp) <= tol:
            # converged relative to the problem scale; keep polishing while
            # the unscaled residuals still improve
            merit = max(stat, comp)
            if merit < 0.5 * best:
                best, stalled = merit, 0
            else:
                stalled += 1
            if stalled >= 3:
                status = QpStatus.OPTIMAL
                it -= 1
                break
        if m and lam.max() > 1e14:
            break

        w = lam / s if m else np.zeros(0)
        KKT = np.zeros((n + q, n + q))
        KKT[:n, :n] = H + (G.T * w) @ G + reg * np.eye(n)
        KKT[:n, n:] = A.T
        KKT[n:, :n] = A
        try:
            factor = sla.lu_factor(KKT, check_finite=False)
        except (sla.LinAlgError, ValueError):
            break

        def newton(r_c):
            rhs_z = -r_d - G.T @ (w * r_p - r_c / s) if m else -r_d
            sol = sla.lu_solve(factor, np.concatenate([rhs_z, -r_e]), check_finite=False)
            dz, dnu = sol[:n], sol[n:]
            dlam = w * (G @ dz + r_p) - r_c / s
            ds = -(r_c + s * dlam) / lam
            return dz, ds, dlam, dnu

        if m:
            dz, ds, dlam, dnu = newton(s * lam)
            alpha = min(_max_step(s, ds), _max_step(lam, dlam))
            mu_aff = float((s + alpha * ds) @ (lam + alpha * dlam)) / m
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            dz, ds, dlam, dnu = newton(s * lam + ds * dlam - sigma * mu)
            alpha = min(1.0, 0.99 * min(_max_step(s, ds), _max_step(lam, dlam)))
        else:
            dz, ds, dlam, dnu = newton(np.zeros(0))
            alpha = 1.0
        z = z + alpha * dz
        s = s + alpha * ds
        lam = lam + alpha * dlam
        nu = nu + alpha * dnu
        if not (np.all(np.isfinite(z)) and np.all(np.isfinite(lam))):
            break

    if status is QpStatus.OPTIMAL:
        polished = _polish(H, g, G, h, A, b, s, lam, tol / scale, tol * h_scale)
        if polished is not None:
            z, lam, nu = polished

    lam_full = np.zeros(p.h.size)
    lam_full[finite] = lam * scale
    nu_full = U_r @ nu * scale if q else np.zeros(p.b_eq.size)
    if status is not QpStatus.OPTIMAL and _feasible_set_empty(p):
        status = QpStatus.INFEASIBLE
        if raise_on_infeasible:
            raise Infeasible("QP constraints admit no feasible point", {"iterations": it})
    obj = p.objective(z) if status is QpStatus.OPTIMAL else float("nan")
    return QpSolution(z, obj, status, it, time.perf_counter() - t0, lam_full, nu_full)
