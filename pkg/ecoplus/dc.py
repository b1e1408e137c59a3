"""Quadratic consumption surrogate and its convex-concave minimization."""
from __future__ import annotations
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, List, Optional, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .consumption import cpem_power, kmmk_rate
from .dynamics import derive_resistance_coefficients
from .errors import InfeasibleError, ModelError, SolverError
from .models import CpemParams, KmmkParams, Limits, RoadSpec, StrategyKind
from .problem import ScenarioSpec, SolutionBundle, build_problem, extract_solution, solve_strategy
from .solvers import SolverOptions, Status, solve
from .utils import write_csv

log = logging.getLogger(__name__)

RateFn = Callable[[np.ndarray, np.ndarray], np.ndarray]


class DcOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    grid_a: int = Field(31, ge=10, description="acceleration samples over [u_min, u_max]")
    grid_v: int = Field(31, ge=10, description="velocity samples over [0, v_max]")
    max_iter: int = Field(50, ge=1)
    rel_tol: float = Field(1e-6, gt=0)


@dataclass(frozen=True)
class QuadraticSurrogate:
    """c1 a^2 + c2 v^2 + c3 a v + c4 a + c5 v + c6 with Hessian split P - N."""
    coef: np.ndarray
    P: np.ndarray
    N: np.ndarray
    rms: float = 0.0
    max_abs: float = 0.0
    points: int = 0
    sign_agreement: float = 1.0

    @classmethod
    def from_coefficients(cls, coef, **stats) -> "QuadraticSurrogate":
        coef = np.asarray(coef, dtype=float)
        if coef.shape != (6,):
            raise ModelError("a quadratic surrogate has exactly six coefficients")
        P, N = split_hessian(coef)
        return cls(coef=coef, P=P, N=N, **stats)

    @property
    def hessian(self) -> np.ndarray:
        c1, c2, c3 = self.coef[:3]
        return np.array([[2.0 * c1, c3], [c3, 2.0 * c2]])

    @property
    def is_convex(self) -> bool:
        return not np.any(self.N)

    def value(self, a, v):
        c1, c2, c3, c4, c5, c6 = self.coef
        a = np.asarray(a, dtype=float)
        v = np.asarray(v, dtype=float)
        return c1 * a ** 2 + c2 * v ** 2 + c3 * a * v + c4 * a + c5 * v + c6

    def convex_model(self, a, v, a_bar, v_bar):
        """Upper model at anchor (a_bar, v_bar); equals value() at the anchor."""
        w = np.stack([np.asarray(a, dtype=float), np.asarray(v, dtype=float)])
        wb = np.stack([np.asarray(a_bar, dtype=float), np.asarray(v_bar, dtype=float)])
        Nwb = self.N @ wb
        lin = self.coef[3:5, None]
        return (0.5 * np.sum(w * (self.P @ w), axis=0) + np.sum((lin - Nwb) * w, axis=0)
                + self.coef[5] + 0.5 * np.sum(wb * Nwb, axis=0))


def split_hessian(coef: np.ndarray):
    c1, c2, c3 = coef[:3]
    Hf = np.array([[2.0 * c1, c3], [c3, 2.0 * c2]])
    vals, vecs = np.linalg.eigh(Hf)
    P = vecs @ np.diag(np.maximum(vals, 0.0)) @ vecs.T
    N = vecs @ np.diag(np.maximum(-vals, 0.0)) @ vecs.T
    P = 0.5 * (P + P.T)
    N = 0.5 * (N + N.T)
    # keep the convex case exact: no round-off concave part
    if vals.min() >= 0:
        P, N = Hf.copy(), np.zeros((2, 2))
    elif vals.max() <= 0:
        P, N = np.zeros((2, 2)), -Hf
    return P, N


def fit_surrogate(model: Union[CpemParams, KmmkParams, RateFn], limits: Limits, road: RoadSpec = RoadSpec(),
                  opts: DcOptions = DcOptions()) -> QuadraticSurrogate:
    """Least-squares fit over the (a, v) grid.

    KMMK is fitted only where the recovered control u = a + a^r(v) lies in
    (0, u_max], the region where it burns fuel. A plain callable rate(a, v)
    is fitted over the full grid."""
    a_grid = np.linspace(limits.u_min, limits.u_max, opts.grid_a)
    v_grid = np.linspace(0.0, limits.v_max, opts.grid_v)
    A, V = (arr.ravel() for arr in np.meshgrid(a_grid, v_grid, indexing="ij"))

    if isinstance(model, KmmkParams):
        coeffs = derive_resistance_coefficients(model, road)
        U = A + coeffs.decel(V)
        keep = (U > 0) & (U <= model.u_max)
        A, V, U = A[keep], V[keep], U[keep]
        target = np.asarray(kmmk_rate(V, U, model, road.slope, road.gravity), dtype=float)
    elif isinstance(model, CpemParams):
        target = np.asarray(cpem_power(V, A, model, road.slope, road.gravity), dtype=float)
    elif callable(model):
        target = np.asarray(model(A, V), dtype=float)
    else:
        raise ModelError(f"cannot fit a surrogate to {type(model).__name__}")

    if A.size < 6:
        raise ModelError(f"degenerate fit grid: only {A.size} usable points")
    X = np.column_stack([A ** 2, V ** 2, A * V, A, V, np.ones_like(A)])
    coef, _, rank, _ = np.linalg.lstsq(X, target, rcond=None)
    if rank < 6:
        raise ModelError(f"degenerate fit grid: design matrix rank {rank} < 6 over {A.size} points")
    resid = X @ coef - target
    fitted = X @ coef
    agree = float(np.mean(np.sign(fitted) == np.sign(target))) if target.size else 1.0
    sur = QuadraticSurrogate.from_coefficients(
        coef, rms=float(np.sqrt(np.mean(resid ** 2))), max_abs=float(np.max(np.abs(resid))),
        points=int(A.size), sign_agreement=agree)
    log.info("surrogate fit over %d points: rms %.4g, max %.4g, sign agreement %.1f%%",
             sur.points, sur.rms, sur.max_abs, 100 * agree)
    return sur


def write_surrogate_csv(path: Path, sur: QuadraticSurrogate) -> None:
    write_csv(Path(path), ["c1", "c2", "c3", "c4", "c5", "c6", "rms"], [[*map(float, sur.coef), sur.rms]])


def dc_solve(spec: ScenarioSpec, surrogate: QuadraticSurrogate, opts: DcOptions = DcOptions(),
             init: Optional[SolutionBundle] = None,
             solver_opts: Optional[SolverOptions] = None) -> SolutionBundle:
    """Convex-concave procedure started from ``init`` (the VM optimum by default).

    Each step solves the QP with the concave part linearized at the previous
    iterate. A step that raises the surrogate objective is rejected and the
    previous iterate returned with diagnostics["monotone"] = False."""
    dt = spec.dt
    if init is None:
        init, res = solve_strategy(spec, StrategyKind.VM, opts=solver_opts)
        if init is None:
            raise InfeasibleError(f"no feasible starting point at tm={spec.boundary.tm} ({res.status.value})")

    def total(traj) -> float:
        return float(np.sum(surrogate.value(traj.a[:-1], traj.v[:-1])) * dt)

    current = init
    history: List[float] = [total(init.trajectory)]
    converged = False
    monotone = True
    iterations = 0
    for k in range(1, opts.max_iter + 1):
        anchor = (np.array(current.trajectory.a), np.array(current.trajectory.v))
        prog = build_problem(spec, StrategyKind.DC_SURROGATE, surrogate=surrogate, anchor=anchor)
        res = solve(prog, solver_opts)
        if res.status is Status.INFEASIBLE:
            raise InfeasibleError(f"DC subproblem {k} infeasible on a fixed feasible set")
        if not res.optimal:
            raise SolverError(f"DC subproblem {k} failed: {res.status.value}")
        candidate = extract_solution(prog, res, spec.coeffs, spec.limits)
        iterations = k
        f_new = total(candidate.trajectory)
        decrease = history[-1] - f_new
        if decrease < -opts.rel_tol * max(1.0, abs(history[-1])):
            log.warning("convex-concave step %d raised the surrogate objective by %.3g; keeping the previous iterate",
                        k, -decrease)
            monotone = False
            break
        current = candidate
        history.append(f_new)
        if surrogate.is_convex or decrease <= opts.rel_tol * max(1.0, abs(history[-2])):
            converged = True
            break

    if not converged:
        log.warning("convex-concave procedure stopped after %d iterations without converging", iterations)
    if current is init:
        current = replace(init, diagnostics=dict(init.diagnostics))
    current.diagnostics.update(model_objective=current.objective, history=history,
                               converged=converged, monotone=monotone,
                               ccp_iterations=iterations)
    current.objective = history[-1]
    return current
