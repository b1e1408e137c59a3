"""Discrete eco-driving programs over the shared feasible set.

Variables are laid out family by family: x[0..H], v[0..H], a[0..H],
J[0..H-1], then the auxiliary z[0..H-1] (ECO+ epigraph) or w[0..H-1]
(L1 acceleration). The control input is eliminated through
u = a + a^r(v) and recovered after the solve.
"""
from __future__ import annotations
import logging
from dataclasses import dataclass, field
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple, Union

import numpy as np
import scipy.sparse as sps

from .dynamics import (
    CONTROL_BOUND_TOL, SafetySpec, Trajectory, ValidationReport, validate_trajectory,
)
from .errors import ExtractionError, ModelError
from .models import (
    BoundarySpec, Limits, PwaMode, ResistanceCoefficients, RoadSpec, Strategy, StrategyKind,
    horizon_steps,
)
from .program import ConvexProgram
from .pwa import PwaSegments, build_pwa, lower_support
from .solvers import SolveResult, SolverOptions, solve

if TYPE_CHECKING:
    from .dc import QuadraticSurrogate

log = logging.getLogger(__name__)

OBJECTIVE_RTOL = 1e-8
COMPLEMENTARITY_TOL = 1e-8


@dataclass(frozen=True)
class ScenarioSpec:
    road: RoadSpec
    boundary: BoundarySpec
    limits: Limits
    coeffs: ResistanceCoefficients
    dt: float = 0.1
    safety: Optional[SafetySpec] = None
    segments: int = 5
    oracle_segments: int = 500

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.safety is not None and not self.safety.covers(self.H):
            raise ValueError(f"leader arrays cover {len(self.safety.leader_x)} points, need {self.H + 1}")

    @property
    def H(self) -> int:
        return horizon_steps(self.boundary.tm, self.dt)

    def with_tm(self, tm: float, safety: Optional[SafetySpec] = None) -> "ScenarioSpec":
        b = self.boundary.model_copy(update={"tm": tm})
        return ScenarioSpec(road=self.road, boundary=b, limits=self.limits, coeffs=self.coeffs, dt=self.dt,
                            safety=safety, segments=self.segments, oracle_segments=self.oracle_segments)

    def pwa_for(self, strategy: Strategy) -> PwaSegments:
        K = self.oracle_segments if strategy.mode is PwaMode.FINE_PWA_ORACLE else self.segments
        return build_pwa(self.coeffs, self.limits.v_max, K)


class _Rows:
    """Row accumulator in COO form with named half-open groups."""

    def __init__(self):
        self.rows: List[int] = []
        self.cols: List[int] = []
        self.vals: List[float] = []
        self.rhs: List[float] = []
        self.groups: Dict[str, Tuple[int, int]] = {}
        self._open: Optional[Tuple[str, int]] = None

    def begin(self, name: str) -> None:
        self._open = (name, len(self.rhs))

    def end(self) -> None:
        name, lo = self._open
        if len(self.rhs) > lo:
            self.groups[name] = (lo, len(self.rhs))
        self._open = None

    def add(self, terms: List[Tuple[int, float]], rhs: float) -> None:
        r = len(self.rhs)
        for j, val in terms:
            self.rows.append(r)
            self.cols.append(j)
            self.vals.append(val)
        self.rhs.append(rhs)

    def matrix(self, n: int) -> Tuple[sps.csr_matrix, np.ndarray]:
        m = len(self.rhs)
        A = sps.csr_matrix((self.vals, (self.rows, self.cols)), shape=(m, n))
        A.sum_duplicates()
        return A, np.array(self.rhs, dtype=float)


def _crude_checks(spec: ScenarioSpec) -> None:
    b, lim, tm = spec.boundary, spec.limits, spec.boundary.tm
    dv = b.vd - b.v0
    reach = lim.u_max * tm if dv > 0 else abs(lim.u_min) * tm
    if abs(dv) > reach:
        log.warning("|vd - v0| = %.3g exceeds the control reach %.3g over tm = %.3g; expect infeasibility",
                    abs(dv), reach, tm)
    if spec.road.length > lim.v_max * tm:
        log.warning("L = %.3g cannot be covered within tm = %.3g at v_max = %.3g; expect infeasibility",
                    spec.road.length, tm, lim.v_max)
    if spec.safety is not None and spec.safety.leader_x[0] < spec.safety.min_gap:
        log.warning("leader starts %.3g m ahead, closer than the minimum gap", spec.safety.leader_x[0])


def build_problem(spec: ScenarioSpec, strategy: Union[Strategy, StrategyKind], pwa: Optional[PwaSegments] = None,
                  surrogate: Optional["QuadraticSurrogate"] = None,
                  anchor: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> ConvexProgram:
    """Assemble the program for one scenario and strategy.

    ``pwa`` defaults to the scenario's segment count (the oracle count for
    the fine sub-mode); it shapes the control bounds for every strategy.
    The DC strategy needs ``surrogate`` and an ``anchor`` (a, v) at which its
    concave part is linearized."""
    if isinstance(strategy, StrategyKind):
        strategy = Strategy(kind=strategy)
    kind = strategy.kind
    road, bnd, lim, coeffs, dt = spec.road, spec.boundary, spec.limits, spec.coeffs, spec.dt
    for label, val in (("v0", bnd.v0), ("vd", bnd.vd)):
        if not 0.0 <= val <= lim.v_max:
            raise ModelError(f"{label} = {val} outside [0, v_max = {lim.v_max}]")
    if kind is StrategyKind.DC_SURROGATE and (surrogate is None or anchor is None):
        raise ValueError("the DC strategy needs a surrogate and an anchor trajectory")
    if pwa is None:
        pwa = spec.pwa_for(strategy)
    if abs(pwa.v_max - lim.v_max) > 1e-12:
        raise ModelError("PWA domain does not match v_max")
    _crude_checks(spec)

    H = spec.H
    ix = np.arange(H + 1)
    iv = ix + (H + 1)
    ia = iv + (H + 1)
    iJ = 3 * (H + 1) + np.arange(H)
    n = 3 * (H + 1) + H
    names: Dict[str, np.ndarray] = {"x": ix, "v": iv, "a": ia, "J": iJ}
    if kind is StrategyKind.ECO_PLUS:
        names["z"] = n + np.arange(H)
        n += H
    elif kind is StrategyKind.AM_L1:
        names["w"] = n + np.arange(H)
        n += H

    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[iv], ub[iv] = 0.0, lim.v_max
    lb[iJ], ub[iJ] = lim.j_min, lim.j_max
    if lim.a_min is not None:
        lb[ia] = lim.a_min
    if lim.a_max is not None:
        ub[ia] = lim.a_max
    for fam in ("z", "w"):
        if fam in names:
            lb[names[fam]] = 0.0

    def fix(j: int, value: float) -> None:
        lb[j] = max(lb[j], value)
        ub[j] = min(ub[j], value)

    fix(ix[0], 0.0)
    fix(ix[H], road.length)
    fix(iv[0], bnd.v0)
    fix(iv[H], bnd.vd)
    if bnd.zero_boundary_control:
        fix(ia[0], -float(coeffs.decel(bnd.v0)))
        fix(ia[H], -float(coeffs.decel(bnd.vd)))

    eq = _Rows()
    eq.begin("dyn_x")
    for i in range(H):
        eq.add([(ix[i + 1], 1.0), (ix[i], -1.0), (iv[i], -dt)], 0.0)
    eq.end()
    eq.begin("dyn_v")
    for i in range(H):
        eq.add([(iv[i + 1], 1.0), (iv[i], -1.0), (ia[i], -dt)], 0.0)
    eq.end()
    eq.begin("jerk")
    for i in range(H):
        eq.add([(iJ[i], dt), (ia[i + 1], -1.0), (ia[i], 1.0)], 0.0)
    eq.end()

    ineq = _Rows()
    if kind is StrategyKind.ECO_PLUS:
        iz = names["z"]
        ineq.begin("epigraph")
        for i in range(H):
            for k in range(pwa.K):
                ineq.add([(ia[i], 1.0), (iv[i], pwa.b1[k]), (iz[i], -1.0)], -pwa.b2[k])
        ineq.end()
    ineq.begin("control_upper")
    for i in range(H + 1):
        for k in range(pwa.K):
            ineq.add([(ia[i], 1.0), (iv[i], pwa.b1[k])], lim.u_max - pwa.b2[k])
    ineq.end()
    t1, t0 = lower_support(coeffs, lim.v_max)
    ineq.begin("control_lower")
    for i in range(H + 1):
        ineq.add([(ia[i], -1.0), (iv[i], -t1)], -(lim.u_min - t0))
    ineq.end()
    if spec.safety is not None:
        sf = spec.safety
        ineq.begin("gap")
        for i in range(H + 1):
            ineq.add([(ix[i], 1.0)], sf.leader_x[i] - sf.min_gap)
        ineq.end()
        if sf.time_gap > 0:
            ineq.begin("time_gap")
            for i in range(H + 1):
                ineq.add([(ix[i], 1.0), (iv[i], sf.time_gap)], sf.leader_x[i] + sf.time_gap * sf.leader_v[i])
            ineq.end()
    if kind is StrategyKind.AM_L1:
        iw = names["w"]
        ineq.begin("abs_accel")
        for i in range(H):
            ineq.add([(ia[i], 1.0), (iw[i], -1.0)], 0.0)
            ineq.add([(ia[i], -1.0), (iw[i], -1.0)], 0.0)
        ineq.end()

    c = np.zeros(n)
    q_diag = np.zeros(n)
    Q: Optional[sps.csr_matrix] = None
    constant = 0.0
    head = slice(0, H)
    if kind is StrategyKind.ECO_PLUS:
        c[names["z"]] = dt
    elif kind is StrategyKind.VM:
        q_diag[iv[head]] = 2.0 * dt
    elif kind is StrategyKind.JM:
        q_diag[iJ] = 2.0 * dt
    elif kind is StrategyKind.AM:
        q_diag[ia[head]] = 2.0 * dt
    elif kind is StrategyKind.VM_L1:
        c[iv[head]] = dt
    elif kind is StrategyKind.AM_L1:
        c[names["w"]] = dt
    elif kind is StrategyKind.VA:
        c[iv[head]] = dt
        q_diag[ia[head]] = 2.0 * dt
    elif kind is StrategyKind.UM:
        Q, c, constant = _control_objective(t1, t0, ia[head], iv[head], n, dt)
    elif kind is StrategyKind.DC_SURROGATE:
        Q, c, constant = _dc_objective(surrogate, anchor, ia[head], iv[head], n, dt)
    if q_diag.any():
        Q = sps.diags(q_diag, format="csr")

    A_eq, b_eq = eq.matrix(n)
    A_in, b_in = ineq.matrix(n)
    meta: Dict[str, Any] = {"dt": dt, "strategy": strategy, "H": H, "pwa": pwa, "control_support": (t1, t0)}
    if kind is StrategyKind.DC_SURROGATE:
        meta.update(surrogate=surrogate, anchor=anchor)
    prog = ConvexProgram(c=c, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in, lb=lb, ub=ub, Q=Q,
                         constant=constant, names=names, eq_groups=eq.groups, in_groups=ineq.groups, meta=meta)
    log.debug("built %s program: n=%d, %d equalities, %d inequalities",
              strategy.label, n, b_eq.size, b_in.size)
    return prog


def _control_objective(t1: float, t0: float, ia, iv, n: int, dt: float):
    """sum_i (a_i + t1 v_i + t0)^2 dt: the control input with a^r replaced by its
    affine under-estimate, so the objective stays quadratic."""
    rows = np.concatenate([ia, ia, iv, iv])
    cols = np.concatenate([ia, iv, ia, iv])
    vals = 2.0 * dt * np.concatenate([np.ones(ia.size), np.full(ia.size, t1),
                                      np.full(ia.size, t1), np.full(ia.size, t1 * t1)])
    Q = sps.csr_matrix((vals, (rows, cols)), shape=(n, n))
    c = np.zeros(n)
    c[ia] = 2.0 * dt * t0
    c[iv] = 2.0 * dt * t0 * t1
    return Q, c, dt * t0 * t0 * ia.size


def _dc_objective(sur: "QuadraticSurrogate", anchor, ia, iv, n: int, dt: float):
    """Convex model of the surrogate, its concave part linearized at the anchor.

    Per step, with w = (a, v): 1/2 w'Pw + (l - N w_bar)'w + c6 + 1/2 w_bar'N w_bar."""
    a_bar = np.asarray(anchor[0], dtype=float)[: ia.size]
    v_bar = np.asarray(anchor[1], dtype=float)[: ia.size]
    P, N = sur.P, sur.N
    lin = np.array([sur.coef[3], sur.coef[4]])
    rows = np.concatenate([ia, ia, iv, iv])
    cols = np.concatenate([ia, iv, ia, iv])
    vals = dt * np.concatenate([np.full(ia.size, P[0, 0]), np.full(ia.size, P[0, 1]),
                                np.full(ia.size, P[1, 0]), np.full(ia.size, P[1, 1])])
    Q = sps.csr_matrix((vals, (rows, cols)), shape=(n, n))
    Q.eliminate_zeros()
    W = np.stack([a_bar, v_bar])                # 2 x H
    NW = N @ W
    c = np.zeros(n)
    c[ia] = dt * (lin[0] - NW[0])
    c[iv] = dt * (lin[1] - NW[1])
    constant = dt * float(np.sum(sur.coef[5] + 0.5 * np.sum(W * NW, axis=0)))
    return Q, c, constant


@dataclass
class SolutionBundle:
    strategy: Strategy
    trajectory: Trajectory
    objective: float
    u_violation: float
    aux: Dict[str, np.ndarray] = field(default_factory=dict)
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def validate(self, spec: ScenarioSpec, tol: float = 1e-6) -> ValidationReport:
        return validate_trajectory(self.trajectory, spec.road, spec.boundary, spec.limits, spec.coeffs,
                                   safety=spec.safety, tol=tol)


def _pwa_pci(traj: Trajectory, pwa: PwaSegments) -> np.ndarray:
    """max(0, a_i + max_k(b1_k v_i + b2_k)) for i < H."""
    a, v = traj.a[:-1], traj.v[:-1]
    pieces = np.multiply.outer(v, pwa.b1) + pwa.b2 + a[:, None]
    return np.maximum(pieces.max(axis=1), 0.0)


def strategy_objective(prog: ConvexProgram, traj: Trajectory, aux: Dict[str, np.ndarray]) -> float:
    """Objective of ``prog`` evaluated from the trajectory by the strategy's own formula."""
    strategy: Strategy = prog.meta["strategy"]
    dt = traj.dt
    v, a = traj.v[:-1], traj.a[:-1]
    kind = strategy.kind
    if kind is StrategyKind.ECO_PLUS:
        return float(np.sum(aux["z"]) * dt)
    if kind is StrategyKind.VM:
        return float(np.sum(v ** 2) * dt)
    if kind is StrategyKind.JM:
        return float(np.sum(traj.J ** 2) * dt)
    if kind is StrategyKind.AM:
        return float(np.sum(a ** 2) * dt)
    if kind is StrategyKind.VM_L1:
        return float(np.sum(v) * dt)
    if kind is StrategyKind.AM_L1:
        return float(np.sum(aux["w"]) * dt)
    if kind is StrategyKind.VA:
        return float(np.sum(v + a ** 2) * dt)
    if kind is StrategyKind.UM:
        t1, t0 = prog.meta["control_support"]
        return float(np.sum((a + t1 * v + t0) ** 2) * dt)
    if kind is StrategyKind.DC_SURROGATE:
        sur = prog.meta["surrogate"]
        a_bar, v_bar = (np.asarray(arr, dtype=float)[: v.size] for arr in prog.meta["anchor"])
        return float(np.sum(sur.convex_model(a, v, a_bar, v_bar)) * dt)
    raise ValueError(f"no objective formula for {strategy.label}")


def extract_solution(prog: ConvexProgram, raw: Union[SolveResult, np.ndarray],
                     coeffs: ResistanceCoefficients, limits: Optional[Limits] = None) -> SolutionBundle:
    """Map a solver vector back to a trajectory and cross-check its objective."""
    if isinstance(raw, SolveResult):
        if raw.x is None:
            raise ExtractionError(f"solver returned no primal vector (status {raw.status.value})")
        x, reported, diagnostics = raw.x, raw.objective, dict(raw.diagnostics)
        diagnostics.update(status=raw.status.value, iterations=raw.iterations, wall_time=raw.wall_time)
    else:
        x = np.asarray(raw, dtype=float)
        reported, diagnostics = None, {}
    if x.size != prog.n:
        raise ExtractionError(f"solution has {x.size} entries, program has {prog.n}")
    if reported is None:
        reported = prog.objective(x)

    H = prog.meta.get("H")
    expected = {"x": H + 1, "v": H + 1, "a": H + 1, "J": H}
    for fam, size in expected.items():
        idx = prog.names.get(fam)
        if idx is None or idx.size != size:
            raise ExtractionError(f"name map entry '{fam}' missing or of wrong length")
    xs, vs, as_, Js = (x[prog.names[f]] for f in ("x", "v", "a", "J"))
    u = as_ + coeffs.decel(vs)
    traj = Trajectory(dt=prog.meta["dt"], x=xs, v=vs, a=as_, u=u, J=Js)
    aux = {f: x[prog.names[f]] for f in ("z", "w") if f in prog.names}

    recomputed = strategy_objective(prog, traj, aux)
    if abs(recomputed - reported) > OBJECTIVE_RTOL * max(1.0, abs(reported)):
        raise ExtractionError(f"objective cross-check failed: solver {reported!r}, recomputed {recomputed!r}")

    strategy: Strategy = prog.meta["strategy"]
    if strategy.kind is StrategyKind.ECO_PLUS:
        gaps = aux["z"] - _pwa_pci(traj, prog.meta["pwa"])
        diagnostics["complementarity_gap"] = float(np.max(np.abs(gaps)))
        diagnostics["pci"] = traj.positive_control_integral()
        if diagnostics["complementarity_gap"] > COMPLEMENTARITY_TOL * max(1.0, abs(reported)):
            log.warning("epigraph variables exceed the PWA maximum by up to %.3g",
                        diagnostics["complementarity_gap"])

    u_violation = 0.0
    if limits is not None:
        u_violation = float(np.max(np.maximum(np.maximum(u - limits.u_max, limits.u_min - u), 0.0)))
        if u_violation > 0:
            log.warning("recovered control leaves [u_min, u_max] by %.3g%s", u_violation,
                        "" if u_violation <= CONTROL_BOUND_TOL else " (beyond tolerance)")
    return SolutionBundle(strategy=strategy, trajectory=traj, objective=float(reported),
                          u_violation=u_violation, aux=aux, diagnostics=diagnostics)


def solve_strategy(spec: ScenarioSpec, strategy: Union[Strategy, StrategyKind],
                   pwa: Optional[PwaSegments] = None,
                   opts: Optional[SolverOptions] = None) -> Tuple[Optional[SolutionBundle], SolveResult]:
    """Build, solve and extract one single-program strategy (everything except DC)."""
    if isinstance(strategy, StrategyKind):
        strategy = Strategy(kind=strategy)
    if strategy.kind is StrategyKind.DC_SURROGATE:
        raise ValueError("the DC strategy is iterative; use ecoplus.dc.dc_solve")
    prog = build_problem(spec, strategy, pwa=pwa)
    res = solve(prog, opts)
    if not res.optimal:
        log.info("%s at tm=%.4g: %s", strategy.label, spec.boundary.tm, res.status.value)
        return None, res
    return extract_solution(prog, res, spec.coeffs, spec.limits), res
