"""Fixed-step RK4, its closed form for frozen-scheduling linear dynamics,
and the adaptive plant integrator."""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import StepFailure
from .model import PhysicalParams, nonlinear_dynamics

PLANT_RTOL = 1e-9
PLANT_ATOL = 1e-9


class LtvStep(NamedTuple):
    A_d: np.ndarray
    B_d: np.ndarray
    ts: float


def rk4_step(f: Callable, x, u, ts: float):
    """One classical Runge-Kutta step of ``x' = f(x, u)`` with ``u`` held."""
    if ts <= 0:
        raise ValueError("ts must be positive")
    x = np.asarray(x, dtype=float)
    k1 = f(x, u)
    k2 = f(x + 0.5 * ts * k1, u)
    k3 = f(x + 0.5 * ts * k2, u)
    k4 = f(x + ts * k3, u)
    return x + (ts / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def discretize_ltv(mats, ts: float) -> LtvStep:
    """RK4 transition of ``x' = A x + B u`` as a matrix polynomial.

    ``A_d = I + tA + (tA)^2/2 + (tA)^3/6 + (tA)^4/24`` and
    ``B_d = t (I + tA/2 + (tA)^2/6 + (tA)^3/24) B``. Works batched over
    leading dimensions of ``A``.
    """
    if ts <= 0:
        raise ValueError("ts must be positive")
    A, B = np.asarray(mats[0], dtype=float), np.asarray(mats[1], dtype=float)
    n = A.shape[-1]
    eye = np.broadcast_to(np.eye(n), A.shape)
    hA = ts * A
    hA2 = hA @ hA
    hA3 = hA2 @ hA
    A_d = eye + hA + hA2 / 2.0 + hA3 / 6.0 + (hA3 @ hA) / 24.0
    B_d = ts * ((eye + hA / 2.0 + hA2 / 6.0 + hA3 / 24.0) @ B)
    return LtvStep(A_d, B_d, ts)


def simulate_plant(x, u_zoh: float, ts: float, params: PhysicalParams,
                   rtol: float = PLANT_RTOL, atol: float = PLANT_ATOL):
    """Advance the nonlinear model over one sample with a held input.

    Uses the Dormand-Prince 5(4) pair with error control; the same pair
    MATLAB's ``ode45`` uses.
    """
    if ts <= 0:
        raise ValueError("ts must be positive")
    x = np.asarray(x, dtype=float)
    try:
        sol = solve_ivp(lambda t, y: nonlinear_dynamics(y, u_zoh, params), (0.0, ts), x,
                        method="RK45", rtol=rtol, atol=atol)
    except OverflowError as exc:
        raise StepFailure(f"state overflowed: {exc}") from exc
    if sol.status != 0 or not np.all(np.isfinite(sol.y[:, -1])):
        raise StepFailure(sol.message)
    return sol.y[:, -1]
