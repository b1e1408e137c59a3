"""Third-order longitudinal dynamics on the Euler-forward grid.

State x (position), v (velocity), a (acceleration) with jerk J as the
forward difference of a, and control u entering through
a = u - a^r(v), a^r(v) = d1 + d2 v + d3 v^2.
"""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from .errors import ModelError
from .models import (
    BoundarySpec, CpemParams, KmmkParams, Limits, ResistanceCoefficients, RoadSpec,
    horizon_steps,
)
from .utils import read_csv, write_csv

log = logging.getLogger(__name__)

CONTROL_BOUND_TOL = 1e-6


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class Trajectory:
    dt: float
    x: np.ndarray
    v: np.ndarray
    a: np.ndarray
    u: np.ndarray
    J: np.ndarray

    def __post_init__(self):
        n = len(self.x)
        if n < 2:
            raise ValueError("trajectory needs at least two grid points")
        for name in ("v", "a", "u"):
            if len(getattr(self, name)) != n:
                raise ValueError(f"array '{name}' has length {len(getattr(self, name))}, expected {n}")
        if len(self.J) != n - 1:
            raise ValueError(f"jerk array has length {len(self.J)}, expected {n - 1}")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        for name in ("x", "v", "a", "u", "J"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))

    @property
    def H(self) -> int:
        return len(self.x) - 1

    @property
    def t(self) -> np.ndarray:
        return np.arange(self.H + 1) * self.dt

    def positive_control_integral(self) -> float:
        """Sum of max(u_i, 0)*dt over i = 0..H-1."""
        return float(np.sum(np.maximum(self.u[:-1], 0.0)) * self.dt)


@dataclass(frozen=True)
class SafetySpec:
    """Leader samples on the ego grid (index i is ego time i*dt)."""
    leader_x: np.ndarray
    leader_v: np.ndarray
    min_gap: float
    time_gap: float
    entry_delay: float = 0.0

    def __post_init__(self):
        if self.min_gap <= 0:
            raise ValueError("min_gap must be positive")
        if self.time_gap < 0:
            raise ValueError("time_gap must be non-negative")
        if len(self.leader_x) != len(self.leader_v):
            raise ValueError("leader position and velocity arrays differ in length")
        object.__setattr__(self, "leader_x", _frozen(self.leader_x))
        object.__setattr__(self, "leader_v", _frozen(self.leader_v))

    def covers(self, H: int) -> bool:
        return len(self.leader_x) >= H + 1

    @classmethod
    def from_leader(cls, leader: Trajectory, H: int, min_gap: float, time_gap: float,
                    entry_delay: float) -> "SafetySpec":
        """Shift the leader by the ego entry delay and extend it at its final speed."""
        shift = int(round(entry_delay / leader.dt))
        if not math.isclose(shift * leader.dt, entry_delay, abs_tol=1e-9):
            raise ValueError("entry delay must be a multiple of the grid step")
        idx = shift + np.arange(H + 1)
        last = leader.H
        xs = np.empty(H + 1)
        vs = np.empty(H + 1)
        inside = idx <= last
        xs[inside] = leader.x[idx[inside]]
        vs[inside] = leader.v[idx[inside]]
        beyond = ~inside
        if beyond.any():
            extra = idx[beyond] - last
            vs[beyond] = leader.v[last]
            xs[beyond] = leader.x[last] + extra * leader.dt * leader.v[last]
        return cls(leader_x=xs, leader_v=vs, min_gap=min_gap, time_gap=time_gap, entry_delay=entry_delay)


def derive_resistance_coefficients(params: CpemParams | KmmkParams, road: RoadSpec) -> ResistanceCoefficients:
    g, th = road.gravity, road.slope
    if params.mass <= 0:
        raise ModelError("vehicle mass must be positive")
    if isinstance(params, KmmkParams):
        d1 = params.mu * g * math.cos(th) + g * math.sin(th)
        d2 = 0.0
        d3 = params.drag_coefficient * params.rho * params.area / (2.0 * params.mass)
    elif isinstance(params, CpemParams):
        rolling = g * math.cos(th) * params.c_r / 1000.0
        d1 = rolling * params.c2 + g * math.sin(th)
        d2 = rolling * params.c1
        d3 = params.rho * params.area * params.drag_coefficient / (2.0 * params.mass)
    else:
        raise ModelError(f"unsupported vehicle model: {type(params).__name__}")
    if not d3 > 0:
        raise ModelError(f"d3 = {d3} must be positive for the convex reformulation")
    return ResistanceCoefficients(d1=d1, d2=d2, d3=d3)


def rollout(u, boundary: BoundarySpec, coeffs: ResistanceCoefficients, dt: float) -> Trajectory:
    u = np.asarray(u, dtype=float)
    H = len(u) - 1
    if H < 1:
        raise ValueError("control array needs at least two entries")
    if dt <= 0:
        raise ValueError("dt must be positive")
    x = np.zeros(H + 1)
    v = np.zeros(H + 1)
    a = np.zeros(H + 1)
    v[0] = boundary.v0
    for i in range(H):
        a[i] = u[i] - coeffs.decel(v[i])
        x[i + 1] = x[i] + dt * v[i]
        v[i + 1] = v[i] + dt * a[i]
    a[H] = u[H] - coeffs.decel(v[H])
    J = np.diff(a) / dt
    return Trajectory(dt=dt, x=x, v=v, a=a, u=u, J=J)


def recover_control_input(traj: Trajectory, coeffs: ResistanceCoefficients) -> np.ndarray:
    return np.asarray(traj.a) + coeffs.decel(np.asarray(traj.v))


@dataclass
class Check:
    residual: float
    index: Optional[int]
    tol: float

    @property
    def passed(self) -> bool:
        return self.residual <= self.tol


@dataclass
class ValidationReport:
    checks: Dict[str, Check] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> List[str]:
        return [name for name, c in self.checks.items() if not c.passed]

    def as_dict(self) -> Dict[str, Dict]:
        return {k: {"residual": c.residual, "index": c.index, "passed": c.passed} for k, c in self.checks.items()}


def _worst(values: np.ndarray):
    if values.size == 0:
        return 0.0, None
    i = int(np.argmax(values))
    return float(max(values[i], 0.0)), i


def _bound_violation(vals: np.ndarray, lo: Optional[float], hi: Optional[float]) -> np.ndarray:
    viol = np.zeros_like(vals)
    if lo is not None:
        viol = np.maximum(viol, lo - vals)
    if hi is not None:
        viol = np.maximum(viol, vals - hi)
    return viol


def validate_trajectory(traj: Trajectory, road: RoadSpec, boundary: BoundarySpec, limits: Limits,
                        coeffs: ResistanceCoefficients, safety: Optional[SafetySpec] = None,
                        tol: float = 1e-6) -> ValidationReport:
    dt, x, v, a, u, J = traj.dt, traj.x, traj.v, traj.a, traj.u, traj.J
    rep = ValidationReport()

    def add(name, values, tolerance=tol, absolute=False):
        r, i = _worst(np.abs(values) if absolute else values)
        rep.checks[name] = Check(r, i, tolerance)

    expected_H = horizon_steps(boundary.tm, dt)
    rep.checks["horizon"] = Check(float(abs(traj.H - expected_H)), None, 0.0)

    add("dynamics_x", x[1:] - x[:-1] - dt * v[:-1], absolute=True)
    add("dynamics_v", v[1:] - v[:-1] - dt * a[:-1], absolute=True)
    add("jerk_definition", dt * J - (a[1:] - a[:-1]), absolute=True)
    add("control_identity", u - (a + coeffs.decel(v)), absolute=True)

    rep.checks["boundary_x0"] = Check(abs(float(x[0])), 0, tol)
    rep.checks["boundary_xH"] = Check(abs(float(x[-1]) - road.length), traj.H, tol)
    rep.checks["boundary_v0"] = Check(abs(float(v[0]) - boundary.v0), 0, tol)
    rep.checks["boundary_vH"] = Check(abs(float(v[-1]) - boundary.vd), traj.H, tol)
    if boundary.zero_boundary_control:
        rep.checks["boundary_u0"] = Check(abs(float(u[0])), 0, tol)
        rep.checks["boundary_uH"] = Check(abs(float(u[-1])), traj.H, tol)

    add("velocity_bounds", _bound_violation(v, 0.0, limits.v_max))
    add("control_bounds", _bound_violation(u, limits.u_min, limits.u_max), max(tol, CONTROL_BOUND_TOL))
    add("jerk_bounds", _bound_violation(J, limits.j_min, limits.j_max))
    if limits.a_min is not None or limits.a_max is not None:
        add("accel_bounds", _bound_violation(a, limits.a_min, limits.a_max))

    if safety is not None:
        if not safety.covers(traj.H):
            raise ValueError("leader arrays do not cover the ego horizon")
        xf = safety.leader_x[: traj.H + 1]
        vf = safety.leader_v[: traj.H + 1]
        gap = xf - x
        add("safety_gap", safety.min_gap - gap)
        add("safety_time_gap", (v - vf) * safety.time_gap - gap)

    u_viol = rep.checks["control_bounds"].residual
    if 0 < u_viol <= CONTROL_BOUND_TOL:
        log.warning("recovered control exceeds its bounds by %.3g (tolerated)", u_viol)
    return rep


TRAJECTORY_HEADER = ["i", "t", "x", "v", "a", "u", "J"]


def write_trajectory_csv(path: Path, traj: Trajectory, rates: Optional[np.ndarray] = None) -> None:
    header = list(TRAJECTORY_HEADER) + (["rate"] if rates is not None else [])
    rows = []
    for i in range(traj.H + 1):
        row = [i, i * traj.dt, traj.x[i], traj.v[i], traj.a[i], traj.u[i], traj.J[i] if i < traj.H else None]
        if rates is not None:
            row.append(rates[i])
        rows.append(row)
    write_csv(Path(path), header, rows)


def read_trajectory_csv(path: Path) -> Trajectory:
    cols = read_csv(Path(path))
    missing = [c for c in TRAJECTORY_HEADER if c not in cols]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    t = np.array([float(s) for s in cols["t"]])
    if len(t) < 2:
        raise ValueError(f"{path}: trajectory needs at least two rows")
    dt = float(t[1] - t[0])

    def col(name):
        return np.array([float(s) for s in cols[name]])

    jerk = [float(s) for s in cols["J"][:-1]]
    return Trajectory(dt=dt, x=col("x"), v=col("v"), a=col("a"), u=col("u"), J=np.array(jerk))
