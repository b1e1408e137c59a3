"""Leading-vehicle profile: cruise, brake to a stop, hold, AM-optimal restart."""
from __future__ import annotations
import logging
import math

import numpy as np

from ..config import ConfigFile
from ..dynamics import Trajectory, derive_resistance_coefficients
from ..errors import InfeasibleError, ModelError
from ..models import BoundarySpec, RoadSpec, StrategyKind
from ..problem import ScenarioSpec, solve_strategy

log = logging.getLogger(__name__)


def _grid_index(t: float, dt: float, what: str) -> int:
    i = int(round(t / dt))
    if not math.isclose(i * dt, t, abs_tol=1e-9):
        raise ModelError(f"{what} = {t} is not on the {dt} s grid")
    return i


def build_leading_profile(cfg: ConfigFile) -> Trajectory:
    """Leader trajectory on the experiment grid. While it stands still u is
    reported as 0 rather than a + a^r(0), which would be a positive d1."""
    s, lim, dt = cfg.safety, cfg.limits, cfg.experiment.dt
    coeffs = derive_resistance_coefficients(cfg.vehicle, cfg.road)
    i_stop = _grid_index(s.leader_stop_time, dt, "leader_stop_time")
    i_go = _grid_index(s.leader_stop_time + s.leader_hold, dt, "leader restart time")
    i_end = _grid_index(s.leader_exit_time, dt, "leader_exit_time")

    # fewest grid steps that brake from the entry speed within |u_min|
    n_brake = int(math.ceil(s.leader_entry_speed / (abs(lim.u_min) * dt) - 1e-9))
    i_brake = i_stop - n_brake
    if i_brake < 0:
        raise ModelError("leader cannot stop by leader_stop_time from its entry speed")
    decel = s.leader_entry_speed / (n_brake * dt)

    v = np.zeros(i_go + 1)
    a = np.zeros(i_go + 1)
    v[: i_brake + 1] = s.leader_entry_speed
    steps = np.arange(1, n_brake + 1)
    v[i_brake + steps] = s.leader_entry_speed - steps * decel * dt
    v[i_stop] = 0.0
    a[i_brake:i_stop] = -decel
    x = np.concatenate([[0.0], np.cumsum(dt * v[:-1])])

    remaining = s.leader_exit_position - x[i_go]
    if remaining <= 0:
        raise ModelError(f"leader already passed leader_exit_position ({x[i_go]:.3f} m) when restarting")
    seg = ScenarioSpec(
        road=RoadSpec(length=remaining, slope=cfg.road.slope, gravity=cfg.road.gravity),
        boundary=BoundarySpec(v0=0.0, vd=s.leader_exit_speed, tm=(i_end - i_go) * dt, zero_boundary_control=False),
        limits=lim, coeffs=coeffs, dt=dt, segments=cfg.pwa.segments)
    bundle, res = solve_strategy(seg, StrategyKind.AM, opts=cfg.solver)
    if bundle is None:
        raise InfeasibleError(f"leader acceleration segment is {res.status.value}")
    restart = bundle.trajectory

    x = np.concatenate([x[:i_go], x[i_go] + restart.x])
    v = np.concatenate([v[:i_go], restart.v])
    a = np.concatenate([a[:i_go], restart.a])
    u = a + coeffs.decel(v)
    # standing still the brakes hold the vehicle: no traction
    u[i_stop:i_go] = 0.0
    log.debug("leader brakes from %.2f s at %.3f m/s^2 and stops at x = %.3f m",
              i_brake * dt, decel, x[i_stop])
    return Trajectory(dt=dt, x=x, v=v, a=a, u=u, J=np.diff(a) / dt)
