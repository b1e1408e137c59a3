"""Scenario studies built on sweeps: single vehicle, leading vehicle, tight comfort."""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import numpy as np

from ..config import ConfigFile
from ..consumption import relative_difference
from ..dc import fit_surrogate
from ..dynamics import Trajectory, validate_trajectory
from ..models import Strategy, StrategyKind
from ..problem import solve_strategy
from ..pwa import ApproximationErrorReport, approximation_error_report, build_pwa
from .leading import build_leading_profile
from .sweep import (
    CurveAudit, TradeoffCurve, audit_curve, relative_differences, scenario_spec, tradeoff_sweep,
)

log = logging.getLogger(__name__)


@dataclass
class ScenarioReport:
    family: str
    model: str
    base: str
    curves: Dict[float, TradeoffCurve] = field(default_factory=dict)
    relative: Dict[float, Dict[str, Optional[float]]] = field(default_factory=dict)
    audits: Dict[float, Dict[str, CurveAudit]] = field(default_factory=dict)
    # comfort family: the same sweep without the tight limits
    baseline_relative: Dict[float, Dict[str, Optional[float]]] = field(default_factory=dict)
    leader: Optional[Trajectory] = None

    def gap_shrinks(self, strategy: str) -> Dict[float, Optional[bool]]:
        out: Dict[float, Optional[bool]] = {}
        for vd, rel in self.relative.items():
            now, before = rel.get(strategy), self.baseline_relative.get(vd, {}).get(strategy)
            out[vd] = None if now is None or before is None else now < before
        return out

    @property
    def all_valid(self) -> bool:
        return all(not a.invalid_points for aud in self.audits.values() for a in aud.values())


def _vds(cfg: ConfigFile, family: str) -> List[float]:
    if family == "leading":
        return [cfg.safety.ego_exit_speed]
    if family == "comfort":
        return [cfg.comfort.vd]
    return list(cfg.experiment.vd)


def run_scenario(cfg: ConfigFile, family: Optional[str] = None, workers: Optional[int] = None,
                 keep_trajectories: bool = True) -> ScenarioReport:
    family = family or cfg.experiment.family
    labels = cfg.experiment.strategies
    base = "ecoplus" if "ecoplus" in labels else labels[0]
    report = ScenarioReport(family=family, model=cfg.experiment.model, base=base)
    if family == "leading":
        report.leader = build_leading_profile(cfg)
    surrogate = fit_surrogate(cfg.vehicle, cfg.limits, cfg.road, cfg.dc) if "dc" in labels else None

    for vd in _vds(cfg, family):
        curve = tradeoff_sweep(cfg, vd=vd, family=family, leader=report.leader, surrogate=surrogate,
                               workers=workers, keep_trajectories=keep_trajectories)
        report.curves[vd] = curve
        report.relative[vd] = relative_differences(curve, base)
        report.audits[vd] = audit_curve(curve, base)
        if family == "comfort":
            plain = tradeoff_sweep(cfg, vd=vd, family="single", surrogate=surrogate, workers=workers,
                                   keep_trajectories=False)
            report.baseline_relative[vd] = relative_differences(plain, base)
        for s, rel in report.relative[vd].items():
            if rel is not None:
                log.info("%s vd=%g: %s vs %s average difference %.2f%%", family, vd, s, base, rel)
    return report


@dataclass
class PwaStudy:
    vd: float
    segments: int
    oracle_segments: int
    curve: TradeoffCurve
    mean_objective_difference: Optional[float]
    mean_time_ratio: Optional[float]
    speedup: Optional[float]
    approximation: Dict[int, ApproximationErrorReport]


def pwa_study(cfg: ConfigFile, vd: Optional[float] = None, workers: Optional[int] = None) -> PwaStudy:
    """ECO+ with the configured K against the fine-PWA oracle over one sweep.

    The objective difference is |J_K - J_oracle| / max(|J_K|, |J_oracle|) in
    percent averaged over the common feasible travel times; the time ratio is
    the mean of K-solve time over oracle-solve time."""
    vd = cfg.experiment.vd[0] if vd is None else vd
    curve = tradeoff_sweep(cfg, vd=vd, strategies=["ecoplus", "ecoplus-oracle"], family="single",
                           workers=workers, keep_trajectories=False)
    a, b = curve.by_tm("ecoplus"), curve.by_tm("ecoplus-oracle")
    common = sorted(set(a) & set(b))
    diff = ratio = speedup = None
    if common:
        diff = float(np.mean([relative_difference(a[t].objective, b[t].objective) for t in common]))
        fast = np.array([a[t].solve_ms for t in common])
        slow = np.array([b[t].solve_ms for t in common])
        ratio = float(np.mean(fast / slow))
        speedup = float(100.0 * (1.0 - fast.sum() / slow.sum()))
    coeffs = scenario_spec(cfg, vd, cfg.experiment.tm_max).coeffs
    approx = {K: approximation_error_report(build_pwa(coeffs, cfg.limits.v_max, K), coeffs)
              for K in (cfg.pwa.segments, cfg.pwa.oracle_segments)}
    if diff is not None:
        log.info("PWA K=%d vs K=%d: objective difference %.3f%%, time ratio %.3f",
                 cfg.pwa.segments, cfg.pwa.oracle_segments, diff, ratio)
    return PwaStudy(vd=vd, segments=cfg.pwa.segments, oracle_segments=cfg.pwa.oracle_segments, curve=curve,
                    mean_objective_difference=diff, mean_time_ratio=ratio, speedup=speedup,
                    approximation=approx)


@dataclass
class TimeGapRun:
    time_gap: float
    status: str
    trajectory: Optional[Trajectory] = None
    min_gap: Optional[float] = None
    min_gap_time: Optional[float] = None
    first_brake_time: Optional[float] = None
    safety_ok: Optional[bool] = None


def compare_time_gap(cfg: ConfigFile, tm: float, strategy: str = "ecoplus",
                     leader: Optional[Trajectory] = None) -> List[TimeGapRun]:
    """Leading scenario at one travel time, with the configured time gap and without.

    Times are on the ego clock (zero at its zone entry)."""
    leader = leader if leader is not None else build_leading_profile(cfg)
    strat = Strategy.parse(strategy)
    if strat.kind is StrategyKind.DC_SURROGATE:
        raise ValueError("time-gap comparison runs single-program strategies only")
    runs: List[TimeGapRun] = []
    for tg in (cfg.safety.time_gap, 0.0):
        spec = scenario_spec(cfg, cfg.safety.ego_exit_speed, tm, "leading", leader, time_gap=tg)
        bundle, res = solve_strategy(spec, strat, opts=cfg.solver)
        if bundle is None:
            runs.append(TimeGapRun(time_gap=tg, status=res.status.value))
            continue
        traj = bundle.trajectory
        gap = spec.safety.leader_x[: spec.H + 1] - traj.x
        i_min = int(np.argmin(gap))
        braking = np.flatnonzero(traj.u < -1e-6)
        check = validate_trajectory(traj, spec.road, spec.boundary, spec.limits, spec.coeffs, spec.safety)
        runs.append(TimeGapRun(time_gap=tg, status=res.status.value, trajectory=traj,
                               min_gap=float(gap[i_min]), min_gap_time=float(i_min * traj.dt),
                               first_brake_time=float(braking[0] * traj.dt) if braking.size else None,
                               safety_ok=check.ok))
    return runs
