"""Recover the nonlinear-model constants ``b`` from a linearized model.

The linearization of the planar model at the origin has six free entries
``p1..p6``; each is a rational function ``h_i(b)`` of the four constants
``b = (b1, b2, b3, b4)``. Refinement solves the overdetermined system
``p - h(b) = 0`` in the least-squares sense with a damped Gauss-Newton
iteration.
"""
from __future__ import annotations

from dataclasses import dataclass, field, astuple
from typing import NamedTuple

import numpy as np

from .errors import Diverged, SingularJacobian, SingularMass
from .model import EPS_DET


class Geometry(NamedTuple):
    ell: float = 0.2978
    r_b: float = 0.12
    r_w: float = 0.05
    g: float = 9.81


@dataclass(frozen=True)
class LinearParams:
    """Entries of the origin linearization.

    ``p1 = A32, p2 = A33, p3 = B3, p4 = A42, p5 = A43, p6 = B4``.
    """

    p1: float
    p2: float
    p3: float
    p4: float
    p5: float
    p6: float

    def __post_init__(self):
        if not np.all(np.isfinite(astuple(self))):
            raise ValueError("linear parameters must be finite")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=float)


# p6 is stored negative: B4 at the origin is negative for any b with
# b1 > b2 - ell*r_b, and only that sign fits the other five entries.
PAPER_P = LinearParams(-342.6038, -52.8301, -1425.9, -36.0734, -9.1477, -251.8476)

DEFAULT_B0 = (0.001, 0.05, 0.10, 0.0)


@dataclass
class RefineResult:
    b_star: np.ndarray
    residual_norm: float
    residual_history: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False


def _geom(geom) -> Geometry:
    return Geometry(geom.ell, geom.r_b, geom.r_w, geom.g)


def h_functions(b, geom) -> np.ndarray:
    """Origin-linearization entries ``(h1, ..., h6)`` as functions of ``b``."""
    b1, b2, b3, b4 = (float(v) for v in b)
    ell, r_b, r_w, g = _geom(geom)
    c = b2 - ell * r_b
    d0 = b1 * b3 - c * c
    if abs(d0) <= EPS_DET:
        raise SingularMass(f"d(0) = {d0:g} too close to zero")
    return np.array([
        g * ell * c / d0,
        -b3 * b4 / d0,
        (b3 * r_b - r_b * c) / (r_w * d0),
        b1 * g * ell / d0,
        -b4 * c / d0,
        (r_b * c - b1 * r_b) / (r_w * d0),
    ])


def residual_F(b, p, geom) -> np.ndarray:
    p = p.as_array() if isinstance(p, LinearParams) else np.asarray(p, dtype=float)
    return p - h_functions(b, geom)


def jacobian_F(b, p, geom) -> np.ndarray:
    """Central-difference Jacobian, 6x4."""
    b = np.asarray(b, dtype=float)
    J = np.empty((6, 4))
    for i in range(4):
        step = 1e-6 * max(1.0, abs(b[i]))
        e = np.zeros(4)
        e[i] = step
        J[:, i] = (residual_F(b + e, p, geom) - residual_F(b - e, p, geom)) / (2 * step)
    return J


def gauss_newton_step(J, F, rank_tol: float = 1e-12) -> np.ndarray:
    """Minimizer of ``||F + J delta||`` via a thin QR factorization."""
    Qm, Rm = np.linalg.qr(J)
    diag = np.abs(np.diag(Rm))
    if diag.min() <= rank_tol * diag.max():
        raise SingularJacobian(f"R diagonal {diag} is rank deficient")
    return -np.linalg.solve(Rm, Qm.T @ F)


def newton_refine(b0=DEFAULT_B0, p: LinearParams = PAPER_P, geom=Geometry(),
                  tol: float = 1e-9, max_iter: int = 50,
                  max_halvings: int = 10) -> RefineResult:
    """Damped Gauss-Newton on ``F(b) = p - h(b)``.

    Each step is the least-squares solution of the linearized system,
    shortened by halving until the residual norm does not increase.
    Iteration stops once the relative decrease of ``||F||`` drops below
    ``tol``.

    Raises
    ------
    Diverged
        If no damped step reduces the residual while the linear model
        still predicts a meaningful decrease.
    SingularJacobian, SingularMass
        From the step computation or the residual evaluation.
    """
    b = np.asarray(b0, dtype=float).copy()
    F = residual_F(b, p, geom)
    r = float(np.linalg.norm(F))
    history = [r]
    converged = False
    it = 0
    while it < max_iter:
        J = jacobian_F(b, p, geom)
        delta = gauss_newton_step(J, F)
        predicted = float(np.linalg.norm(F + J @ delta))
        t = 1.0
        accepted = False
        for _ in range(max_halvings + 1):
            trial = b + t * delta
            try:
                F_trial = residual_F(trial, p, geom)
            except SingularMass:
                F_trial = None
            if F_trial is not None and np.all(np.isfinite(F_trial)):
                r_trial = float(np.linalg.norm(F_trial))
                if r_trial <= r:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            if r - predicted <= tol * r:
                converged = True
                break
            raise Diverged(f"no damped step reduced ||F|| = {r:g} at b = {b}")
        it += 1
        rel = (r - r_trial) / r if r > 0 else 0.0
        b, F, r = trial, F_trial, r_trial
        history.append(r)
        if rel < tol or r == 0.0:
            converged = True
            break
    return RefineResult(b, r, history, it, converged)
