"""Instantaneous and trip-total consumption: CPEM (battery energy) and KMMK (fuel)."""
from __future__ import annotations
import logging
import math
from dataclasses import dataclass
from typing import Literal, Union

import numpy as np

from .dynamics import CONTROL_BOUND_TOL, Trajectory
from .errors import ModelError
from .models import GRAVITY, CpemParams, KmmkParams

log = logging.getLogger(__name__)

JOULES_PER_KWH = 3.6e6

ModelTag = Literal["cpem", "kmmk"]


def _check_speed(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if np.any(v < -1e-9):
        raise ModelError("consumption models are defined for v >= 0 only")
    return np.maximum(v, 0.0)


def regen_efficiency(a, params: CpemParams):
    """eta_rb = exp(k/|a|)^-1 while decelerating, 0 otherwise."""
    a = np.asarray(a, dtype=float)
    neg = a < 0
    safe = np.where(neg, np.abs(a), 1.0)
    out = np.where(neg, np.exp(-params.regen_coefficient / safe), 0.0)
    return out if out.ndim else float(out)


def wheel_power(v, a, params: CpemParams, theta: float = 0.0, g: float = GRAVITY):
    v = _check_speed(v)
    a = np.asarray(a, dtype=float)
    m = params.mass
    force = (m * a
             + m * g * math.cos(theta) * params.c_r / 1000.0 * (params.c1 * v + params.c2)
             + 0.5 * params.rho * params.area * params.drag_coefficient * v ** 2
             + m * g * math.sin(theta))
    return force * v


def cpem_power(v, a, params: CpemParams, theta: float = 0.0, g: float = GRAVITY):
    """Battery-side rate P*eta_b in watts; negative while recuperating."""
    p_w = wheel_power(v, a, params, theta, g)
    p_em = p_w / (params.eta_d * params.eta_em)
    p = np.where(p_w >= 0, p_em, p_em * regen_efficiency(a, params))
    out = p * params.eta_b
    return out if np.ndim(out) else float(out)


def kmmk_rate(v, u, params: KmmkParams, theta: float = 0.0, g: float = GRAVITY,
              u_tol: float = CONTROL_BOUND_TOL):
    """Fuel rate in mL/s; zero unless 0 < u <= u_max (u_max widened by u_tol)."""
    v = _check_speed(v)
    u = np.asarray(u, dtype=float)
    f_cruise = params.c0 + params.c1 * v + params.c2 * v ** 2 + params.c3 * v ** 3
    a_v = (-params.drag_coefficient * params.rho * params.area * v ** 2 / (2.0 * params.mass)
           - params.mu * g * math.cos(theta) - g * math.sin(theta) + u)
    a_hat = a_v + g * math.sin(theta)
    f_accel = a_hat * (params.c4 + params.c5 * v + params.c6 * v ** 2)
    on = (u > 0) & (u <= params.u_max + u_tol)
    out = np.where(on, f_cruise + f_accel, 0.0)
    return out if np.ndim(out) else float(out)


@dataclass(frozen=True)
class ConsumptionReport:
    model: ModelTag
    total: float
    rates: np.ndarray
    unit: str
    anomalies: int = 0


def cpem_energy(traj: Trajectory, params: CpemParams, theta: float = 0.0, g: float = GRAVITY) -> ConsumptionReport:
    rates = np.asarray(cpem_power(traj.v, traj.a, params, theta, g), dtype=float)
    total = float(np.sum(rates[:-1]) * traj.dt / JOULES_PER_KWH)
    return ConsumptionReport(model="cpem", total=total, rates=rates, unit="kWh")


def kmmk_fuel(traj: Trajectory, params: KmmkParams, theta: float = 0.0, g: float = GRAVITY) -> ConsumptionReport:
    rates = np.asarray(kmmk_rate(traj.v, traj.u, params, theta, g), dtype=float)
    anomalies = int(np.sum(traj.u[:-1] > params.u_max + CONTROL_BOUND_TOL))
    if anomalies:
        log.warning("%d step(s) with u above u_max counted as zero fuel", anomalies)
    total = float(np.sum(rates[:-1]) * traj.dt)
    return ConsumptionReport(model="kmmk", total=total, rates=rates, unit="mL", anomalies=anomalies)


def evaluate(traj: Trajectory, params: Union[CpemParams, KmmkParams], theta: float = 0.0,
             g: float = GRAVITY) -> ConsumptionReport:
    if isinstance(params, CpemParams):
        return cpem_energy(traj, params, theta, g)
    if isinstance(params, KmmkParams):
        return kmmk_fuel(traj, params, theta, g)
    raise ModelError(f"unsupported consumption model: {type(params).__name__}")


def relative_difference(x: float, y: float) -> float:
    """|x - y| / max(|x|, |y|) in percent; 0 when both are zero."""
    denom = max(abs(x), abs(y))
    if denom == 0:
        return 0.0
    return abs(x - y) / denom * 100.0
