"""Planar ballbot rigid-body model.

One plane (xz or yz) of the ballbot in Euler-Lagrange form::

    M(q) q'' + C(q, q') + D(q') + G(q) = B tau

with generalized coordinates ``q = (phi, theta)`` (ball angle, body tilt).
The functions accept a single state of shape ``(4,)`` or a batch of shape
``(..., 4)``; inputs broadcast against the leading dimensions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, asdict
from typing import NamedTuple

import numpy as np

from .errors import DegenerateAngle, SingularMass

#: Guard on |det M| below which the mass matrix is treated as singular.
EPS_DET = 1e-12


@dataclass(frozen=True)
class PhysicalParams:
    """Constants of the nonlinear planar model.

    ``b1..b4`` are composite inertia/friction constants; the remaining
    fields are geometry (metres), gravity and the zenith angle of the
    omni-wheels.
    """

    b1: float
    b2: float
    b3: float
    b4: float
    ell: float = 0.2978
    r_b: float = 0.12
    r_w: float = 0.05
    g: float = 9.81
    alpha: float = math.pi / 4

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if not math.isfinite(v):
                raise ValueError(f"{f.name} must be finite, got {v}")
        for name in ("ell", "r_b", "r_w", "g"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.alpha < math.pi / 2:
            raise ValueError("alpha must lie in (0, pi/2)")
        if abs(self.det_mass(0.0)) <= EPS_DET:
            raise SingularMass("mass matrix singular at the upright equilibrium")

    @property
    def b(self) -> np.ndarray:
        return np.array([self.b1, self.b2, self.b3, self.b4])

    def with_b(self, b) -> "PhysicalParams":
        b1, b2, b3, b4 = (float(v) for v in b)
        return PhysicalParams(b1, b2, b3, b4, self.ell, self.r_b, self.r_w, self.g, self.alpha)

    def det_mass(self, theta):
        """d(theta) = b1*b3 - (-b2 + ell*r_b*cos(theta))**2."""
        m12 = -self.b2 + self.ell * self.r_b * np.cos(theta)
        return self.b1 * self.b3 - m12 * m12

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PhysicalParams":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise KeyError(f"unknown parameter keys: {sorted(unknown)}")
        return cls(**{k: float(v) for k, v in data.items()})


#: Refined parameters together with the reference geometry.
PAPER_2024 = PhysicalParams(b1=0.002483, b2=0.059325, b3=0.143093, b4=-0.07436)

PRESETS = {"paper-2024": PAPER_2024}


class RigidBodyMatrices(NamedTuple):
    M: np.ndarray
    C: np.ndarray
    D: np.ndarray
    G: np.ndarray
    Btilde: np.ndarray


class MotorTorques(NamedTuple):
    tau1: float
    tau2: float
    tau3: float


def assemble_matrices(theta: float, thetadot: float, params: PhysicalParams,
                      phidot: float = 0.0) -> RigidBodyMatrices:
    """Mass, Coriolis, friction, gravity and input terms at one configuration.

    The friction vector needs the ball rate, which is not part of the
    signature's scheduling pair; it defaults to zero.
    """
    p = params
    s, c = math.sin(theta), math.cos(theta)
    m12 = -p.b2 + p.ell * p.r_b * c
    M = np.array([[p.b1, m12], [m12, p.b3]])
    C = np.array([-p.ell * p.r_b * s * thetadot**2, 0.0])
    D = np.array([p.b4 * phidot, 0.0])
    G = np.array([0.0, -p.ell * p.g * s])
    ratio = p.r_b / p.r_w
    return RigidBodyMatrices(M, C, D, G, np.array([ratio, -ratio]))


def nonlinear_dynamics(x, tau, params: PhysicalParams, disturbance=None):
    """Time derivative of the planar state ``(phi, theta, phidot, thetadot)``.

    ``disturbance`` is an optional additive generalized force (2-vector or
    batch of them) entering as ``M^-1(-C - D - G - disturbance + B tau)``.

    Raises
    ------
    SingularMass
        If ``|det M(theta)| <= EPS_DET`` anywhere in the batch.
    """
    p = params
    x = np.asarray(x, dtype=float)
    if x.ndim == 1 and disturbance is None and np.ndim(tau) == 0:
        return _dynamics_single(x, float(tau), p)
    tau = np.asarray(tau, dtype=float)
    theta, phidot, thetadot = x[..., 1], x[..., 2], x[..., 3]
    s, c = np.sin(theta), np.cos(theta)
    m12 = -p.b2 + p.ell * p.r_b * c
    det = p.b1 * p.b3 - m12 * m12
    if np.any(np.abs(det) <= EPS_DET):
        raise SingularMass(f"|det M| <= {EPS_DET} at theta={theta}")
    ratio = p.r_b / p.r_w
    # rhs = -C - D - G + B tau
    f1 = p.ell * p.r_b * s * thetadot**2 - p.b4 * phidot + ratio * tau
    f2 = p.ell * p.g * s - ratio * tau
    if disturbance is not None:
        e = np.asarray(disturbance, dtype=float)
        f1 = f1 - e[..., 0]
        f2 = f2 - e[..., 1]
    phiddot = (p.b3 * f1 - m12 * f2) / det
    thetaddot = (p.b1 * f2 - m12 * f1) / det
    return np.stack(np.broadcast_arrays(phidot, thetadot, phiddot, thetaddot), axis=-1)


def _dynamics_single(x, tau, p):
    # scalar path for the per-step integrators; same arithmetic as above
    _, theta, phidot, thetadot = x.tolist()
    s, c = math.sin(theta), math.cos(theta)
    m12 = -p.b2 + p.ell * p.r_b * c
    det = p.b1 * p.b3 - m12 * m12
    if abs(det) <= EPS_DET:
        raise SingularMass(f"|det M| <= {EPS_DET} at theta={theta}")
    ratio = p.r_b / p.r_w
    f1 = p.ell * p.r_b * s * thetadot**2 - p.b4 * phidot + ratio * tau
    f2 = p.ell * p.g * s - ratio * tau
    return np.array([phidot, thetadot, (p.b3 * f1 - m12 * f2) / det, (p.b1 * f2 - m12 * f1) / det])


def mechanical_energy(x, params: PhysicalParams):
    """Kinetic plus potential energy consistent with ``nonlinear_dynamics``.

    Conserved along trajectories when ``b4 = 0`` and no torque is applied.
    """
    p = params
    x = np.asarray(x, dtype=float)
    theta, phidot, thetadot = x[..., 1], x[..., 2], x[..., 3]
    m12 = -p.b2 + p.ell * p.r_b * np.cos(theta)
    kinetic = 0.5 * (p.b1 * phidot**2 + 2 * m12 * phidot * thetadot + p.b3 * thetadot**2)
    return kinetic + p.ell * p.g * np.cos(theta)


def torque_matrix(alpha: float) -> np.ndarray:
    ca, sa = math.cos(alpha), math.sin(alpha)
    if abs(ca) < 1e-15 or abs(sa) < 1e-15:
        raise DegenerateAngle(f"zenith angle {alpha} makes the conversion singular")
    r3 = math.sqrt(3.0)
    return np.array([
        [2 / ca, 0.0, 1 / sa],
        [-1 / ca, r3 / ca, 1 / sa],
        [-1 / ca, -r3 / ca, 1 / sa],
    ]) / 3.0


def virtual_to_motor_torques(tau_x: float, tau_y: float, tau_z: float,
                             alpha: float = math.pi / 4) -> MotorTorques:
    """Map the three virtual-wheel torques to the three physical motors."""
    t = torque_matrix(alpha) @ np.array([tau_x, tau_y, tau_z], dtype=float)
    return MotorTorques(*(float(v) for v in t))
