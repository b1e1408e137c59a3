"""Consumption versus travel-time sweeps and the audits run over them."""
from __future__ import annotations
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..config import ConfigFile, sweep_workers
from ..consumption import evaluate, relative_difference
from ..dc import QuadraticSurrogate, dc_solve, fit_surrogate
from ..dynamics import SafetySpec, Trajectory, derive_resistance_coefficients
from ..errors import ExtractionError, InfeasibleError, SolverError
from ..models import Strategy, StrategyKind, horizon_steps
from ..problem import ScenarioSpec, SolutionBundle, solve_strategy

log = logging.getLogger(__name__)

NOISE_TOL = 1e-6
FAMILIES = ("single", "leading", "comfort")


@dataclass
class SweepRecord:
    tm: float
    strategy: str
    model: str
    vd: float
    status: str
    consumption: Optional[float] = None
    objective: Optional[float] = None
    solve_ms: float = 0.0
    valid: Optional[bool] = None
    violations: List[str] = field(default_factory=list)
    min_gap: Optional[float] = None
    trajectory: Optional[Trajectory] = None
    rates: Optional[np.ndarray] = None

    @property
    def feasible(self) -> bool:
        return self.consumption is not None

    def row(self) -> list:
        return [self.tm, self.strategy, self.model, self.consumption, self.objective, self.status, self.solve_ms]


SWEEP_HEADER = ["tm", "strategy", "model", "consumption", "objective", "status", "solve_ms"]


@dataclass
class TradeoffCurve:
    model: str
    vd: float
    family: str
    records: List[SweepRecord] = field(default_factory=list)

    @property
    def all_infeasible(self) -> bool:
        return not any(r.feasible for r in self.records)

    def strategies(self) -> List[str]:
        seen: List[str] = []
        for r in self.records:
            if r.strategy not in seen:
                seen.append(r.strategy)
        return seen

    def by_tm(self, strategy: str, feasible_only: bool = True) -> Dict[float, SweepRecord]:
        return {r.tm: r for r in self.records
                if r.strategy == strategy and (r.feasible or not feasible_only)}

    def series(self, strategy: str) -> Tuple[np.ndarray, np.ndarray]:
        pts = sorted(self.by_tm(strategy).items())
        return (np.array([t for t, _ in pts]), np.array([r.consumption for _, r in pts]))

    def rows(self) -> List[list]:
        return [r.row() for r in self.records]


def tm_grid(start: float, stop: float, step: float) -> List[float]:
    k0 = int(math.ceil(start / step - 1e-9))
    k1 = int(math.floor(stop / step + 1e-9))
    return [round(k * step, 10) for k in range(max(k0, 1), k1 + 1)]


def scenario_spec(cfg: ConfigFile, vd: float, tm: float, family: str = "single",
                  leader: Optional[Trajectory] = None, time_gap: Optional[float] = None) -> ScenarioSpec:
    if family not in FAMILIES:
        raise ValueError(f"unknown scenario family '{family}'")
    limits = cfg.limits
    if family == "comfort":
        c = cfg.comfort
        limits = limits.with_comfort(c.j_min, c.j_max, c.a_min, c.a_max)
    dt = cfg.experiment.dt
    boundary = cfg.boundary.model_copy(update={"vd": vd, "tm": tm})
    safety = None
    if family == "leading":
        if leader is None:
            raise ValueError("the leading family needs a leader trajectory")
        s = cfg.safety
        safety = SafetySpec.from_leader(leader, horizon_steps(tm, dt), s.min_gap,
                                        s.time_gap if time_gap is None else time_gap, s.entry_delay)
    return ScenarioSpec(road=cfg.road, boundary=boundary, limits=limits,
                        coeffs=derive_resistance_coefficients(cfg.vehicle, cfg.road), dt=dt,
                        safety=safety, segments=cfg.pwa.segments, oracle_segments=cfg.pwa.oracle_segments)


@dataclass(frozen=True)
class PointTask:
    cfg: ConfigFile
    vd: float
    tm: float
    strategies: Tuple[str, ...]
    family: str = "single"
    leader: Optional[Trajectory] = None
    surrogate: Optional[QuadraticSurrogate] = None
    keep_trajectories: bool = True


def _record(task: PointTask, spec: ScenarioSpec, label: str, bundle: SolutionBundle,
            status: str, elapsed: float) -> SweepRecord:
    cfg = task.cfg
    report = evaluate(bundle.trajectory, cfg.vehicle, cfg.road.slope, cfg.road.gravity)
    check = bundle.validate(spec)
    if not check.ok:
        log.warning("%s at tm=%g violates %s", label, task.tm, ", ".join(check.failures()))
    min_gap = None
    if spec.safety is not None:
        min_gap = float(np.min(spec.safety.leader_x[: spec.H + 1] - bundle.trajectory.x))
    return SweepRecord(tm=task.tm, strategy=label, model=cfg.experiment.model, vd=task.vd, status=status,
                       consumption=report.total, objective=bundle.objective, solve_ms=elapsed * 1e3,
                       valid=check.ok, violations=check.failures(), min_gap=min_gap,
                       trajectory=bundle.trajectory if task.keep_trajectories else None,
                       rates=report.rates if task.keep_trajectories else None)


def solve_point(task: PointTask) -> List[SweepRecord]:
    """Every requested strategy at one (vd, tm); DC starts from the VM optimum when available."""
    cfg = task.cfg
    spec = scenario_spec(cfg, task.vd, task.tm, task.family, task.leader)
    solved: Dict[str, SolutionBundle] = {}
    out: List[SweepRecord] = []
    for label in task.strategies:
        strategy = Strategy.parse(label)
        t0 = time.perf_counter()
        try:
            if strategy.kind is StrategyKind.DC_SURROGATE:
                if task.surrogate is None:
                    raise ValueError("DC needs a fitted surrogate")
                bundle = dc_solve(spec, task.surrogate, cfg.dc, init=solved.get("vm"), solver_opts=cfg.solver)
                status = "optimal" if bundle.diagnostics.get("converged") else "iteration-limit"
            else:
                bundle, res = solve_strategy(spec, strategy, opts=cfg.solver)
                status = res.status.value
        except InfeasibleError:
            bundle, status = None, "infeasible"
        except (SolverError, ExtractionError) as exc:
            log.error("%s at tm=%g failed: %s", label, task.tm, exc)
            bundle, status = None, "error"
        elapsed = time.perf_counter() - t0
        if bundle is None:
            out.append(SweepRecord(tm=task.tm, strategy=label, model=cfg.experiment.model, vd=task.vd,
                                   status=status, solve_ms=elapsed * 1e3))
            continue
        solved[label] = bundle
        out.append(_record(task, spec, label, bundle, status, elapsed))
    return out


def _run(tasks: Sequence[PointTask], workers: int) -> List[List[SweepRecord]]:
    if workers <= 1 or len(tasks) <= 1:
        return [solve_point(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
        return list(pool.map(solve_point, tasks))


def min_feasible_tm(cfg: ConfigFile, vd: float, family: str = "single",
                    leader: Optional[Trajectory] = None) -> Optional[float]:
    """Smallest tm on the sweep grid with a feasible VM solve, by bisection
    (feasibility only grows with tm); None when even tm_max is infeasible."""
    exp = cfg.experiment
    k_hi = int(math.floor(exp.tm_max / exp.tm_step + 1e-9))

    def feasible(k: int) -> bool:
        spec = scenario_spec(cfg, vd, round(k * exp.tm_step, 10), family, leader)
        bundle, _ = solve_strategy(spec, StrategyKind.VM, opts=cfg.solver)
        return bundle is not None

    if k_hi < 1 or not feasible(k_hi):
        return None
    lo, hi = 0, k_hi
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if feasible(mid):
            hi = mid
        else:
            lo = mid
    return round(hi * exp.tm_step, 10)


def tradeoff_sweep(cfg: ConfigFile, vd: Optional[float] = None, strategies: Optional[Sequence[str]] = None,
                   family: Optional[str] = None, leader: Optional[Trajectory] = None,
                   surrogate: Optional[QuadraticSurrogate] = None, workers: Optional[int] = None,
                   keep_trajectories: bool = True) -> TradeoffCurve:
    exp = cfg.experiment
    vd = exp.vd[0] if vd is None else vd
    family = family or exp.family
    labels = tuple(Strategy.parse(s).label for s in (strategies or exp.strategies))
    if family == "leading" and leader is None:
        from .leading import build_leading_profile
        leader = build_leading_profile(cfg)
    if "dc" in labels and surrogate is None:
        surrogate = fit_surrogate(cfg.vehicle, cfg.limits, cfg.road, cfg.dc)

    curve = TradeoffCurve(model=exp.model, vd=vd, family=family)
    start = exp.tm_min if exp.tm_min is not None else min_feasible_tm(cfg, vd, family, leader)
    if start is None:
        log.error("no feasible travel time up to %g s for vd=%g (%s)", exp.tm_max, vd, family)
        return curve
    grid = tm_grid(start, exp.tm_max, exp.tm_step)
    tasks = [PointTask(cfg=cfg, vd=vd, tm=tm, strategies=labels, family=family, leader=leader,
                       surrogate=surrogate, keep_trajectories=keep_trajectories) for tm in grid]
    n_workers = workers if workers is not None else sweep_workers()
    log.info("sweeping %d travel times x %d strategies (vd=%g, %s, %d workers)",
             len(grid), len(labels), vd, family, n_workers)
    for recs in _run(tasks, n_workers):
        curve.records.extend(recs)
    order = {s: i for i, s in enumerate(labels)}
    curve.records.sort(key=lambda r: (r.tm, order[r.strategy]))
    if curve.all_infeasible:
        log.error("every sweep point is infeasible for vd=%g (%s)", vd, family)
    return curve


# ---------------------------------------------------------------- audits

def is_unimodal(values: Sequence[float], tol: float = NOISE_TOL) -> bool:
    """At most one sign change of the discrete differences (down, then up)."""
    diffs = np.diff(np.asarray(values, dtype=float))
    signs = np.sign(diffs[np.abs(diffs) > tol])
    changes = np.flatnonzero(signs[1:] != signs[:-1])
    if changes.size == 0:
        return True
    return bool(changes.size == 1 and signs[0] < 0)


def feasibility_gaps(curve: TradeoffCurve, strategy: str) -> List[float]:
    """Travel times that are infeasible although a smaller one was feasible."""
    seen_feasible = False
    gaps = []
    for r in sorted((r for r in curve.records if r.strategy == strategy), key=lambda r: r.tm):
        if r.feasible:
            seen_feasible = True
        elif seen_feasible and r.status == "infeasible":
            gaps.append(r.tm)
    return gaps


def dominance_violations(curve: TradeoffCurve, better: str, other: str, tol: float = 1e-9) -> List[float]:
    a, b = curve.by_tm(better), curve.by_tm(other)
    return [tm for tm in sorted(set(a) & set(b))
            if a[tm].consumption > b[tm].consumption + tol * (1.0 + abs(b[tm].consumption))]


def average_relative_difference(curve: TradeoffCurve, first: str, second: str) -> Optional[float]:
    """Mean relative consumption difference (%) over the common feasible travel times."""
    a, b = curve.by_tm(first), curve.by_tm(second)
    common = sorted(set(a) & set(b))
    if not common:
        return None
    return float(np.mean([relative_difference(a[t].consumption, b[t].consumption) for t in common]))


@dataclass
class CurveAudit:
    strategy: str
    feasible_points: int
    unimodal: bool
    feasibility_gaps: List[float]
    invalid_points: List[float]
    dominance_violations: List[float]
    min_consumption: Optional[float]
    tm_at_min: Optional[float]


def audit_curve(curve: TradeoffCurve, base: str = "ecoplus") -> Dict[str, CurveAudit]:
    out: Dict[str, CurveAudit] = {}
    for s in curve.strategies():
        tm, cons = curve.series(s)
        invalid = [r.tm for r in curve.records if r.strategy == s and r.valid is False]
        dom = dominance_violations(curve, base, s) if s != base and base in curve.strategies() else []
        i = int(np.argmin(cons)) if cons.size else None
        out[s] = CurveAudit(strategy=s, feasible_points=int(cons.size), unimodal=is_unimodal(cons),
                            feasibility_gaps=feasibility_gaps(curve, s), invalid_points=invalid,
                            dominance_violations=dom,
                            min_consumption=float(cons[i]) if i is not None else None,
                            tm_at_min=float(tm[i]) if i is not None else None)
        if out[s].feasibility_gaps:
            log.warning("%s: feasibility not monotone in tm at %s", s, out[s].feasibility_gaps)
    return out


def relative_differences(curve: TradeoffCurve, base: str = "ecoplus") -> Dict[str, Optional[float]]:
    return {s: average_relative_difference(curve, s, base) for s in curve.strategies() if s != base}
