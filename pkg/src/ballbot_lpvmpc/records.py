"""CSV persistence of closed-loop trajectories and solve-time statistics."""
from __future__ import annotations

import csv
import math
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import BallbotError
from .mpc import Trajectory

COLUMNS = ("t", "phi", "theta", "phidot", "thetadot", "tau", "J", "solve_time_s", "feasible")


class EmptyTiming(BallbotError):
    """No QP solves were recorded."""


class TimingStats(NamedTuple):
    mean: float
    std: float
    max: float
    count: int

    def as_dict(self) -> dict:
        return self._asdict()


def timing_stats(times) -> TimingStats:
    """Sample mean / standard deviation (n - 1) of per-step solve times.

    Accepts a ``Trajectory`` or a sequence of times in seconds.
    """
    if isinstance(times, Trajectory):
        times = times.solve_time
    times = np.asarray(times, dtype=float).ravel()
    if times.size == 0:
        raise EmptyTiming("no solve times recorded")
    std = float(np.std(times, ddof=1)) if times.size > 1 else 0.0
    return TimingStats(float(times.mean()), std, float(times.max()), int(times.size))


def write_trajectory_csv(traj: Trajectory, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for k in range(len(traj)):
            vals = [traj.t[k], *traj.x[k], traj.u[k], traj.J[k], traj.solve_time[k]]
            w.writerow([f"{v:.17g}" for v in vals] + [int(bool(traj.feasible[k]))])
    return path


def read_trajectory_csv(path) -> Trajectory:
    with Path(path).open(newline="") as fh:
        reader = csv.reader(fh)
        header = tuple(next(reader))
        if header != COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        rows = [r for r in reader if r]
    data = np.array([[float(v) for v in r[:-1]] for r in rows]).reshape(-1, len(COLUMNS) - 1)
    return Trajectory(
        t=data[:, 0], x=data[:, 1:5], u=data[:, 5], J=data[:, 6], solve_time=data[:, 7],
        feasible=np.array([r[-1] == "1" for r in rows], dtype=bool),
    )


def write_residual_history(history, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("iter", "residual_norm"))
        for i, r in enumerate(history):
            w.writerow((i, f"{r:.17g}" if math.isfinite(r) else "nan"))
    return path
