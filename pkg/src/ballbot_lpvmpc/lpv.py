"""Exact LPV embedding of the planar ballbot.

With scheduling ``rho = (theta, thetadot)`` the nonlinear vector field is
rewritten as ``A_c(rho) x + B_c(rho) u``. Nothing is approximated: when
``rho = sigma(x)`` the two agree to round-off.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import SingularMass
from .model import EPS_DET, PhysicalParams


class SchedulingPoint(NamedTuple):
    theta: float
    thetadot: float


@dataclass(frozen=True)
class SchedulingBox:
    theta_min: float = -math.pi / 3
    theta_max: float = math.pi / 3
    thetadot_min: float = -2 * math.pi
    thetadot_max: float = 2 * math.pi

    def __post_init__(self):
        if not (self.theta_min < self.theta_max and self.thetadot_min < self.thetadot_max):
            raise ValueError("scheduling box must satisfy min < max on both axes")

    def inflated(self, margin: float) -> "SchedulingBox":
        """Box grown by ``margin`` times its width on every side."""
        dt = margin * (self.theta_max - self.theta_min)
        dw = margin * (self.thetadot_max - self.thetadot_min)
        return SchedulingBox(self.theta_min - dt, self.theta_max + dt,
                             self.thetadot_min - dw, self.thetadot_max + dw)

    def contains(self, rho) -> np.ndarray:
        rho = np.asarray(rho, dtype=float)
        th, om = rho[..., 0], rho[..., 1]
        return ((th >= self.theta_min) & (th <= self.theta_max)
                & (om >= self.thetadot_min) & (om <= self.thetadot_max))


class LpvMatrices(NamedTuple):
    A_c: np.ndarray  # (..., 4, 4)
    B_c: np.ndarray  # (..., 4, 1)


def sinc(theta):
    """Unnormalized sin(theta)/theta with a series branch near zero."""
    theta = np.asarray(theta, dtype=float)
    small = np.abs(theta) < 1e-4
    safe = np.where(small, 1.0, theta)
    t2 = theta * theta
    return np.where(small, 1.0 - t2 / 6.0 + t2 * t2 / 120.0, np.sin(safe) / safe)


def scheduling_map(x):
    """sigma(x): pick ``(theta, thetadot)`` out of the state."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return SchedulingPoint(float(x[1]), float(x[3]))
    return x[..., [1, 3]]


def lpv_matrices(rho, params: PhysicalParams) -> LpvMatrices:
    """Parameter-dependent ``A_c(rho)``, ``B_c(rho)``.

    ``rho`` may be a single pair or a batch of shape ``(..., 2)``.
    """
    p = params
    rho = np.asarray(rho, dtype=float)
    theta, thetadot = rho[..., 0], rho[..., 1]
    s, c = np.sin(theta), np.cos(theta)
    lr = p.ell * p.r_b
    w = p.b2 - lr * c  # = -M12
    d = p.b1 * p.b3 - w * w
    if np.any(np.abs(d) <= EPS_DET):
        raise SingularMass(f"|d(theta)| <= {EPS_DET} at theta={theta}")
    sc = sinc(theta)

    A = np.zeros(theta.shape + (4, 4))
    B = np.zeros(theta.shape + (4, 1))
    A[..., 0, 2] = 1.0
    A[..., 1, 3] = 1.0
    A[..., 2, 1] = p.ell * p.g * sc * w / d
    A[..., 2, 2] = -p.b3 * p.b4 / d
    A[..., 2, 3] = p.b3 * lr * s * thetadot / d
    A[..., 3, 1] = p.b1 * p.ell * p.g * sc / d
    A[..., 3, 2] = -p.b4 * w / d
    A[..., 3, 3] = lr * s * thetadot * w / d
    B[..., 2, 0] = p.r_b * (p.b3 - w) / (p.r_w * d)
    B[..., 3, 0] = p.r_b * (w - p.b1) / (p.r_w * d)
    return LpvMatrices(A, B)


def lpv_dynamics_given_rho(rho, x, u, params: PhysicalParams):
    """``A_c(rho) x + B_c(rho) u`` with the scheduling frozen (linear in x, u)."""
    A, B = lpv_matrices(rho, params)
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    return np.einsum("...ij,...j->...i", A, x) + B[..., 0] * u[..., None]


def lpv_dynamics(x, u, params: PhysicalParams):
    """The embedded vector field with ``rho = sigma(x)`` re-evaluated."""
    x = np.asarray(x, dtype=float)
    return lpv_dynamics_given_rho(x[..., [1, 3]], x, u, params)
