"""Origin linearization, LQR terminal weight and gain certification."""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import NoConvergence, SingularMass
from .integrators import discretize_ltv
from .lpv import SchedulingBox, lpv_matrices
from .model import PhysicalParams


class LinearModel(NamedTuple):
    A0: np.ndarray
    B0: np.ndarray


class LqrSolution(NamedTuple):
    P: np.ndarray
    K: np.ndarray
    iterations: int
    residual: float


@dataclass(frozen=True)
class GridCertificate:
    n_grid: int
    worst_radius: float
    worst_rho: tuple
    passed: bool


def linearize_at_origin(params: PhysicalParams) -> LinearModel:
    A, B = lpv_matrices((0.0, 0.0), params)
    return LinearModel(A, B)


def dare_residual(A, B, Q, R, P) -> float:
    """Infinity norm of ``A'PA - P - A'PB (R + B'PB)^-1 B'PA + Q``."""
    BtPA = B.T @ P @ A
    res = A.T @ P @ A - P - BtPA.T @ np.linalg.solve(R + B.T @ P @ B, BtPA) + Q
    return float(np.abs(res).max())


def _gain(A, B, R, P):
    return np.linalg.solve(R + B.T @ P @ B, B.T @ P @ A)


def solve_dare(A, B, Q, R, tol: float = 1e-10, max_iter: int = 200) -> LqrSolution:
    """Discrete algebraic Riccati equation by structure-preserving doubling.

    The doubling sequence converges quadratically to the stabilizing
    solution; one Newton-Hewer refinement follows to push the residual
    down to round-off level for badly scaled weights.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    B = np.asarray(B, dtype=float).reshape(A.shape[0], -1)
    Q = np.atleast_2d(np.asarray(Q, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    n = A.shape[0]
    eye = np.eye(n)
    Ak = A.copy()
    Gk = B @ np.linalg.solve(R, B.T)
    Hk = Q.copy()
    for it in range(1, max_iter + 1):
        W = eye + Gk @ Hk
        try:
            WiA = np.linalg.solve(W, Ak)
            WiG = np.linalg.solve(W, Gk)
        except np.linalg.LinAlgError as exc:
            raise NoConvergence(f"doubling breakdown at iteration {it}") from exc
        H_next = Hk + Ak.T @ Hk @ WiA
        Gk = Gk + Ak @ WiG @ Ak.T
        Ak = Ak @ WiA
        if not np.all(np.isfinite(H_next)):
            raise NoConvergence("doubling iterates overflowed (pair not stabilizable?)")
        delta = np.abs(H_next - Hk).max()
        Hk = H_next
        if delta <= tol * max(1.0, np.abs(Hk).max()):
            break
    else:
        raise NoConvergence(f"doubling did not converge in {max_iter} iterations")

    P = 0.5 * (Hk + Hk.T)
    # Newton-Hewer polish: solve the Stein equation for the closed loop.
    for _ in range(2):
        K = _gain(A, B, R, P)
        Acl = A - B @ K
        rhs = Q + K.T @ R @ K
        vecP = np.linalg.solve(np.eye(n * n) - np.kron(Acl.T, Acl.T), rhs.reshape(-1))
        P = vecP.reshape(n, n)
        P = 0.5 * (P + P.T)
    K = _gain(A, B, R, P)
    radius = spectral_radius(A - B @ K)
    if radius >= 1.0:
        raise NoConvergence(f"closed loop not Schur stable (radius {radius:.6g})")
    return LqrSolution(P, K, it, dare_residual(A, B, Q, R, P))


def spectral_radius(M) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M))))


def lqr_for_mpc(params: PhysicalParams, Q, R, ts: float, discrete: bool = True) -> LqrSolution:
    """Terminal weight and gain for the MPC from the origin linearization.

    ``discrete=False`` solves the continuous-time Riccati equation instead
    and returns the corresponding continuous LQR gain.
    """
    A0, B0 = linearize_at_origin(params)
    Q = np.asarray(Q, dtype=float)
    R = np.atleast_2d(np.asarray(R, dtype=float))
    if discrete:
        A_d, B_d, _ = discretize_ltv((A0, B0), ts)
        return solve_dare(A_d, B_d, Q, R)
    from scipy.linalg import solve_continuous_are

    P = solve_continuous_are(A0, B0, Q, R)
    K = np.linalg.solve(R, B0.T @ P)
    res = A0.T @ P + P @ A0 - P @ B0 @ K + Q
    return LqrSolution(0.5 * (P + P.T), K, 0, float(np.abs(res).max()))


def hurwitz_grid_check(K, params: PhysicalParams, box: SchedulingBox = SchedulingBox(),
                       n_grid: int = 51, ts: float = 0.05) -> GridCertificate:
    """Discrete closed-loop spectral radius of ``A_d(rho) - B_d(rho) K`` on a
    uniform lattice over the scheduling box; passes iff every node is
    Schur stable."""
    if n_grid < 2:
        raise ValueError("n_grid must be at least 2")
    K = np.atleast_2d(np.asarray(K, dtype=float))
    th = np.linspace(box.theta_min, box.theta_max, n_grid)
    om = np.linspace(box.thetadot_min, box.thetadot_max, n_grid)
    rho = np.stack(np.meshgrid(th, om, indexing="ij"), axis=-1).reshape(-1, 2)
    try:
        mats = lpv_matrices(rho, params)
    except SingularMass:
        for node in rho:
            lpv_matrices(node, params)  # re-raise with the offending node
        raise
    A_d, B_d, _ = discretize_ltv(mats, ts)
    radii = np.abs(np.linalg.eigvals(A_d - B_d @ K)).max(axis=-1)
    worst = int(np.argmax(radii))
    return GridCertificate(n_grid, float(radii[worst]), tuple(rho[worst]),
                           bool(radii[worst] < 1.0))
