"""Forward-Euler integration of u_t = -T u with zero exterior data.

The h-weighted squared L2 norm decays at least like exp(-lambda1 t), where
lambda1 = 2 lambda_T is the principal eigenvalue of the same discrete
operator; ``fit_decay_rate`` measures the observed rate.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .discretize import DiscreteOperator, apply_operator


@dataclass
class Trajectory:
    times: np.ndarray
    l2sq: np.ndarray
    u_final: np.ndarray
    dt: float
    scheme: str = "forward-euler"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "l2sq"])
        for t, v in zip(self.times, self.l2sq):
            w.writerow([repr(float(t)), repr(float(v))])
        return buf.getvalue()


@dataclass
class DecayFit:
    rate: float
    window: tuple[float, float]
    r_squared: float
    shrunk: bool = False

    def as_dict(self) -> dict:
        return {"rate": self.rate, "window": [self.window[0], self.window[1]], "r_squared": self.r_squared,
                "window_shrunk": self.shrunk}


def stability_limit(op: DiscreteOperator) -> float:
    """1 / max_i d_i; the spectrum of T lies in [0, 2 max d_i]."""
    return 1.0 / float(np.max(op.diag))


def simulate(op: DiscreteOperator, u0, T_end: float, dt: float, record_every: int = 1) -> Trajectory:
    u = np.array(u0, dtype=float)
    if u.shape != (op.n,):
        raise ValueError("initial vector length does not match the interior node count")
    if not np.all(np.isfinite(u)) or not np.any(u):
        raise ValueError("initial data must be finite and not identically zero")
    limit = stability_limit(op)
    if not (0 < dt <= 0.9 * limit):
        raise ValueError(f"dt={dt} outside (0, 0.9 * {limit:.6g}]")
    if T_end < 0 or record_every < 1:
        raise ValueError("need T_end >= 0 and record_every >= 1")
    hd = op.grid.cell_volume
    steps = int(round(T_end / dt))
    times, vals = [0.0], [float(u @ u) * hd]
    for n in range(1, steps + 1):
        u = u - dt * apply_operator(op, u)
        if n % record_every == 0 or n == steps:
            v = float(u @ u) * hd
            if not np.isfinite(v):
                raise FloatingPointError(f"non-finite state at step {n}")
            times.append(n * dt)
            vals.append(v)
    return Trajectory(np.array(times), np.array(vals), u, float(dt))


def fit_decay_rate(traj: Trajectory, window_fraction: float = 0.5, min_records: int = 10) -> DecayFit:
    """Least-squares slope of ln l2sq over the trailing fraction of records.

    Records that underflowed to zero (or to subnormals) are dropped from the
    end and the window is flagged as shrunk.
    """
    if not (0 < window_fraction <= 1):
        raise ValueError("window_fraction must lie in (0, 1]")
    t = np.asarray(traj.times, dtype=float)
    y = np.asarray(traj.l2sq, dtype=float)
    good = y > np.finfo(float).tiny
    shrunk = False
    if not good.all():
        last = np.argmin(good)
        t, y = t[:last], y[:last]
        shrunk = True
    k = int(np.ceil(window_fraction * len(t)))
    if k < min_records:
        raise ValueError(f"window holds {k} records; need at least {min_records}")
    tw, ly = t[-k:], np.log(y[-k:])
    slope, icpt = np.polyfit(tw, ly, 1)
    resid = ly - (slope * tw + icpt)
    ss_tot = float(np.sum((ly - ly.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid ** 2)) / ss_tot if ss_tot > 0 else 1.0
    return DecayFit(float(-slope), (float(tw[0]), float(tw[-1])), r2, shrunk)
