"""Primal-dual interior-point method for convex QPs (LP when Q = 0).

Mehrotra predictor-corrector on

    min 1/2 x'Qx + c'x   s.t.   A x = b,   G x + s = h,   s >= 0,

where G stacks the inequality rows and the finite variable bounds left
after presolve. Each iteration factors the regularized quasi-definite
system

    [ Q + G'WG + rho I    A'      ]
    [ A                 -delta I  ]

with W = diag(lambda/s), followed by iterative refinement against the
unregularized matrix. When the iteration does not converge, an elastic
phase-one LP decides between infeasibility and a numerical failure.
"""
from __future__ import annotations
import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Dict, Literal, Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sps
from pydantic import BaseModel, ConfigDict, Field
from scipy.sparse.linalg import splu

from ..program import ConvexProgram

log = logging.getLogger(__name__)

DENSE_AUTO_LIMIT = 300
REFINEMENT_STEPS = 3
RELATIVE_REGULARIZATION = 1e-14


class SolverOptions(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    max_iter: int = Field(200, ge=1)
    tol: float = Field(1e-8, gt=0, description="relative KKT residual tolerance")
    infeasibility_tol: float = Field(1e-6, gt=0)
    deterministic: bool = True
    linear_algebra: Literal["auto", "sparse", "dense"] = "auto"
    step_fraction: float = Field(0.995, gt=0, lt=1)
    regularization: float = Field(1e-10, gt=0)


class Status(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    ITERATION_LIMIT = "iteration-limit"
    NUMERICAL_FAILURE = "numerical-failure"


@dataclass
class SolveResult:
    status: Status
    x: Optional[np.ndarray]
    y_eq: Optional[np.ndarray] = None
    z_in: Optional[np.ndarray] = None
    z_lb: Optional[np.ndarray] = None
    z_ub: Optional[np.ndarray] = None
    objective: float = float("nan")
    dual_objective: float = float("nan")
    iterations: int = 0
    wall_time: float = 0.0
    residuals: Dict[str, float] = field(default_factory=dict)
    certificate: Optional[Dict[str, Any]] = None
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status is Status.OPTIMAL


# ---------------------------------------------------------------- presolve

@dataclass
class _Reduced:
    Q: sps.csr_matrix
    c: np.ndarray
    A: sps.csr_matrix
    b: np.ndarray
    G: sps.csr_matrix
    h: np.ndarray
    m_in: int                 # leading rows of G that come from A_in
    free: np.ndarray
    fixed_values: np.ndarray
    eq_rows: np.ndarray
    in_rows: np.ndarray
    ub_cols: np.ndarray       # reduced column of each upper-bound row
    lb_cols: np.ndarray
    constant: float
    scale: float


def _presolve(prog: ConvexProgram, tol: float):
    """Drop fixed variables (lb == ub) and rows left empty by that.
    Returns (reduced, None) or (None, infeasibility certificate)."""
    n = prog.n
    lb, ub = prog.lb, prog.ub
    crossed = np.flatnonzero(lb > ub)
    if crossed.size:
        return None, {"kind": "bounds", "columns": crossed.tolist()}
    fixed = np.isfinite(lb) & (lb == ub)
    free = np.flatnonzero(~fixed)
    fix = np.flatnonzero(fixed)
    xf = lb[fix]

    Q = prog.Q if prog.Q is not None else sps.csr_matrix((n, n))
    Q = sps.csr_matrix(Q)
    c = prog.c[free] + (Q[free][:, fix] @ xf if fix.size else 0.0)
    constant = prog.constant + float(prog.c[fix] @ xf) + 0.5 * float(xf @ (Q[fix][:, fix] @ xf))
    Qr = Q[free][:, free].tocsr()

    A_full = sps.csr_matrix(prog.A_eq)
    b = prog.b_eq - (A_full[:, fix] @ xf if fix.size else 0.0)
    A = A_full[:, free].tocsr()
    nnz_eq = np.diff(A.indptr)
    empty_eq = np.flatnonzero(nnz_eq == 0)
    bad = empty_eq[np.abs(b[empty_eq]) > tol * (1.0 + np.abs(prog.b_eq).max(initial=0.0))]
    if bad.size:
        return None, {"kind": "fixed-variable equality", "rows": bad.tolist(),
                      "residuals": b[bad].tolist()}
    eq_rows = np.flatnonzero(nnz_eq > 0)
    A, b = A[eq_rows], b[eq_rows]

    G_full = sps.csr_matrix(prog.A_in)
    h = prog.b_in - (G_full[:, fix] @ xf if fix.size else 0.0)
    G = G_full[:, free].tocsr()
    nnz_in = np.diff(G.indptr)
    empty_in = np.flatnonzero(nnz_in == 0)
    bad = empty_in[h[empty_in] < -tol * (1.0 + np.abs(prog.b_in).max(initial=0.0))]
    if bad.size:
        return None, {"kind": "fixed-variable inequality", "rows": bad.tolist(),
                      "violations": (-h[bad]).tolist()}
    in_rows = np.flatnonzero(nnz_in > 0)
    G, h = G[in_rows], h[in_rows]

    lbf, ubf = lb[free], ub[free]
    ub_cols = np.flatnonzero(np.isfinite(ubf))
    lb_cols = np.flatnonzero(np.isfinite(lbf))
    nf = free.size
    E_ub = sps.csr_matrix((np.ones(ub_cols.size), (np.arange(ub_cols.size), ub_cols)), shape=(ub_cols.size, nf))
    E_lb = sps.csr_matrix((-np.ones(lb_cols.size), (np.arange(lb_cols.size), lb_cols)), shape=(lb_cols.size, nf))
    G_all = sps.vstack([G, E_ub, E_lb]).tocsr()
    h_all = np.concatenate([h, ubf[ub_cols], -lbf[lb_cols]])

    scale = max(1.0, float(np.abs(c).max(initial=0.0)), float(abs(Qr).max()) if Qr.nnz else 0.0)
    red = _Reduced(Q=Qr / scale, c=c / scale, A=A, b=b, G=G_all, h=h_all, m_in=in_rows.size,
                   free=free, fixed_values=xf, eq_rows=eq_rows, in_rows=in_rows,
                   ub_cols=ub_cols, lb_cols=lb_cols, constant=constant, scale=scale)
    return red, None


# ---------------------------------------------------------------- core

@dataclass
class _Iterate:
    x: np.ndarray
    y: np.ndarray
    lam: np.ndarray
    s: np.ndarray
    converged: bool
    reason: str
    iterations: int
    pres: float
    dres: float
    gap: float
    cond_estimate: float = float("nan")


def _factorize(K: sps.spmatrix, dense: bool) -> tuple[Callable[[np.ndarray], np.ndarray], float]:
    if dense:
        lu, piv = sla.lu_factor(K.toarray(), check_finite=True)
        d = np.abs(np.diag(lu))
        return (lambda r: sla.lu_solve((lu, piv), r, check_finite=False)), float(d.max() / max(d.min(), 1e-300))
    fac = splu(K.tocsc(), permc_spec="MMD_AT_PLUS_A")
    d = np.abs(fac.U.diagonal())
    return fac.solve, float(d.max() / max(d.min(), 1e-300))


def _max_step(v: np.ndarray, dv: np.ndarray) -> float:
    neg = dv < 0
    if not neg.any():
        return 1.0
    return float(min(1.0, np.min(-v[neg] / dv[neg])))


def _ipm(Q, c, A, b, G, h, opts: SolverOptions) -> _Iterate:
    n, me, m = c.size, A.shape[0], G.shape[0]
    dense = opts.linear_algebra == "dense" or (opts.linear_algebra == "auto" and n + me <= DENSE_AUTO_LIMIT)
    AT, GT = A.T.tocsr(), G.T.tocsr()
    rho, delta = opts.regularization, opts.regularization
    I_n = sps.identity(n, format="csr")
    I_m = sps.identity(me, format="csr")

    def kkt(w: np.ndarray, reg: float):
        M = Q + GT @ sps.diags(w) @ G if m else Q
        if reg:
            M = M + reg * I_n
        if me == 0:
            return sps.csc_matrix(M)
        lower = -delta * I_m if reg else sps.csr_matrix((me, me))
        return sps.bmat([[M, AT], [A, lower]], format="csc")

    def solver_for(w: np.ndarray):
        # the primal shift follows the largest barrier weight so it survives round-off
        reg = max(rho, RELATIVE_REGULARIZATION * float(w.max(initial=0.0)))
        K_reg = kkt(w, reg)
        K0 = kkt(w, 0.0)
        solve, cond = _factorize(K_reg, dense)

        def refined(r: np.ndarray) -> np.ndarray:
            d = solve(r)
            if not np.all(np.isfinite(d)):
                raise FloatingPointError("non-finite Newton direction")
            for _ in range(REFINEMENT_STEPS):
                nxt = d + solve(r - K0 @ d)
                if not np.all(np.isfinite(nxt)):
                    break
                d = nxt
            return d
        return refined, cond

    b_norm = 1.0 + np.abs(b).max(initial=0.0)
    h_norm = 1.0 + np.abs(h).max(initial=0.0)
    c_norm = 1.0 + np.abs(c).max(initial=0.0)

    # starting point: least-squares fit of the inequality rows on the equality manifold
    try:
        solve0, _ = solver_for(np.ones(m))
        sol = solve0(np.concatenate([-c + GT @ h, b]))
    except (FloatingPointError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
        log.debug("starting point failed: %s", exc)
        sol = np.zeros(n + me)
    x, y = sol[:n], sol[n:]
    s = np.maximum(h - G @ x, 1.0)
    lam = np.ones(m)

    if m == 0:
        r_d = Q @ x + c + AT @ y
        pres = np.abs(A @ x - b).max(initial=0.0) / b_norm
        dres = np.abs(r_d).max(initial=0.0) / c_norm
        ok = pres <= opts.tol and dres <= opts.tol
        return _Iterate(x, y, lam, s, ok, "equality-only" if ok else "singular", 1, pres, dres, 0.0)

    stalled = 0
    cond = float("nan")
    pres = dres = gap = float("inf")
    for it in range(1, opts.max_iter + 1):
        r_d = Q @ x + c + AT @ y + GT @ lam
        r_p = A @ x - b
        r_g = G @ x + s - h
        mu = float(s @ lam) / m
        pobj = 0.5 * float(x @ (Q @ x)) + float(c @ x)
        pres = max(np.abs(r_p).max(initial=0.0) / b_norm, np.abs(r_g).max() / h_norm)
        dres = np.abs(r_d).max(initial=0.0) / c_norm
        gap = float(s @ lam) / (1.0 + abs(pobj))
        if pres <= opts.tol and dres <= opts.tol and gap <= opts.tol:
            return _Iterate(x, y, lam, s, True, "converged", it - 1, pres, dres, gap, cond)
        if lam.max() > 1e12 * c_norm and pres > 1e-6:
            return _Iterate(x, y, lam, s, False, "diverging multipliers", it - 1, pres, dres, gap, cond)

        w = lam / s
        try:
            solve, cond = solver_for(w)
        except (ValueError, RuntimeError, np.linalg.LinAlgError, sla.LinAlgError) as exc:
            log.debug("factorization failed at iteration %d: %s", it, exc)
            return _Iterate(x, y, lam, s, False, f"factorization failed: {exc}", it - 1, pres, dres, gap, cond)

        def newton(r_c: np.ndarray):
            rhs_x = -r_d - GT @ (w * r_g - r_c / s)
            d = solve(np.concatenate([rhs_x, -r_p]))
            dx, dy = d[:n], d[n:]
            dlam = w * (G @ dx + r_g) - r_c / s
            ds = -r_g - G @ dx
            return dx, dy, dlam, ds

        try:
            # predictor
            dx, dy, dlam, ds = newton(s * lam)
            a_aff = min(_max_step(s, ds), _max_step(lam, dlam))
            mu_aff = float((s + a_aff * ds) @ (lam + a_aff * dlam)) / m
            sigma = (mu_aff / mu) ** 3 if mu > 0 else 0.0
            # corrector
            dx, dy, dlam, ds = newton(s * lam + ds * dlam - sigma * mu)
        except (FloatingPointError, ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            log.debug("Newton solve failed at iteration %d: %s", it, exc)
            return _Iterate(x, y, lam, s, False, "non-finite step", it - 1, pres, dres, gap, cond)
        alpha = min(1.0, opts.step_fraction * min(_max_step(s, ds), _max_step(lam, dlam)))
        if not np.all(np.isfinite(dx)) or not np.all(np.isfinite(dlam)):
            return _Iterate(x, y, lam, s, False, "non-finite step", it - 1, pres, dres, gap, cond)

        x = x + alpha * dx
        y = y + alpha * dy
        lam = lam + alpha * dlam
        s = s + alpha * ds
        stalled = stalled + 1 if alpha < 1e-8 else 0
        if stalled >= 5:
            return _Iterate(x, y, lam, s, False, "stalled", it, pres, dres, gap, cond)

    return _Iterate(x, y, lam, s, False, "iteration limit", opts.max_iter, pres, dres, gap, cond)


def _phase_one(red: _Reduced, opts: SolverOptions) -> tuple[float, np.ndarray, _Iterate]:
    """Elastic LP: min 1'p + 1'q + 1't with A x + p - q = b, G_in x - t <= h_in,
    variable bounds kept hard. A positive optimum certifies infeasibility."""
    n, me, mi = red.c.size, red.A.shape[0], red.m_in
    mb = red.G.shape[0] - mi
    nv = n + 2 * me + mi
    c = np.concatenate([np.zeros(n), np.ones(2 * me + mi)])
    A = sps.hstack([red.A, sps.identity(me), -sps.identity(me), sps.csr_matrix((me, mi))]).tocsr()
    G_in = red.G[:mi]
    G_b = red.G[mi:]
    G = sps.vstack([
        sps.hstack([G_in, sps.csr_matrix((mi, 2 * me)), -sps.identity(mi)]),
        sps.hstack([G_b, sps.csr_matrix((mb, 2 * me + mi))]),
        sps.hstack([sps.csr_matrix((2 * me + mi, n)), -sps.identity(2 * me + mi)]),
    ]).tocsr()
    h = np.concatenate([red.h, np.zeros(2 * me + mi)])
    it = _ipm(sps.csr_matrix((nv, nv)), c, A, red.b, G, h, opts)
    elastic = it.x[n:]
    viol = np.concatenate([np.abs(elastic[:me] - elastic[me:2 * me]), np.maximum(elastic[2 * me:], 0.0)])
    return float(c @ it.x), viol, it


def solve(prog: ConvexProgram, opts: Optional[SolverOptions] = None) -> SolveResult:
    opts = opts or SolverOptions()
    t0 = time.perf_counter()
    prog.check()
    red, cert = _presolve(prog, opts.infeasibility_tol)
    if red is None:
        log.info("presolve proved infeasibility: %s", cert.get("kind"))
        return SolveResult(status=Status.INFEASIBLE, x=None, certificate=cert,
                           wall_time=time.perf_counter() - t0)

    it = _ipm(red.Q, red.c, red.A, red.b, red.G, red.h, opts)
    diagnostics = {"reason": it.reason, "condition_estimate": it.cond_estimate,
                   "variables": int(red.c.size), "equalities": int(red.A.shape[0]),
                   "inequalities": int(red.G.shape[0])}
    if it.converged:
        res = _postsolve(prog, red, it)
        res.wall_time = time.perf_counter() - t0
        res.diagnostics = diagnostics
        return res

    p1_obj, viol, p1 = _phase_one(red, opts)
    threshold = opts.infeasibility_tol * (1.0 + max(np.abs(red.b).max(initial=0.0), np.abs(red.h).max(initial=0.0)))
    iterations = it.iterations + p1.iterations
    if p1.converged and p1_obj > threshold:
        eq_names, in_names = prog.row_names()
        me = red.A.shape[0]
        worst = np.argsort(-viol, kind="stable")[:5]
        rows = []
        for k in worst:
            if viol[k] <= 0:
                continue
            rows.append(eq_names[red.eq_rows[k]] if k < me else in_names[red.in_rows[k - me]])
        cert = {"kind": "phase-one", "violation": p1_obj, "rows": rows}
        log.info("infeasible: phase-one optimum %.3g (%s)", p1_obj, ", ".join(rows))
        return SolveResult(status=Status.INFEASIBLE, x=None, certificate=cert, iterations=iterations,
                           wall_time=time.perf_counter() - t0, diagnostics=diagnostics)

    status = Status.ITERATION_LIMIT if it.reason == "iteration limit" else Status.NUMERICAL_FAILURE
    log.warning("interior point stopped without convergence (%s)", it.reason)
    diagnostics.update({"phase_one_objective": p1_obj, "phase_one_converged": p1.converged})
    return SolveResult(status=status, x=None, iterations=iterations, wall_time=time.perf_counter() - t0,
                       residuals={"primal": it.pres, "dual": it.dres, "gap": it.gap},
                       diagnostics=diagnostics)


def _postsolve(prog: ConvexProgram, red: _Reduced, it: _Iterate) -> SolveResult:
    n = prog.n
    x = np.empty(n)
    fixed = np.ones(n, dtype=bool)
    fixed[red.free] = False
    x[red.free] = it.x
    x[fixed] = red.fixed_values

    sc = red.scale
    y_eq = np.zeros(prog.b_eq.size)
    y_eq[red.eq_rows] = it.y * sc
    z_in = np.zeros(prog.b_in.size)
    z_in[red.in_rows] = it.lam[:red.m_in] * sc
    n_ub = red.ub_cols.size
    z_ub = np.zeros(n)
    z_lb = np.zeros(n)
    z_ub[red.free[red.ub_cols]] = it.lam[red.m_in:red.m_in + n_ub] * sc
    z_lb[red.free[red.lb_cols]] = it.lam[red.m_in + n_ub:] * sc

    Q = prog.Q if prog.Q is not None else sps.csr_matrix((n, n))
    grad = Q @ x + prog.c + prog.A_eq.T @ y_eq + prog.A_in.T @ z_in + z_ub - z_lb
    # fixed columns: bound multipliers absorb the stationarity residual
    z_ub[fixed] += np.maximum(-grad[fixed], 0.0)
    z_lb[fixed] += np.maximum(grad[fixed], 0.0)

    objective = prog.objective(x)
    fin_lb = np.isfinite(prog.lb)
    fin_ub = np.isfinite(prog.ub)
    dual_objective = (-0.5 * float(x @ (Q @ x)) - float(prog.b_eq @ y_eq) - float(prog.b_in @ z_in)
                      - float(prog.ub[fin_ub] @ z_ub[fin_ub]) + float(prog.lb[fin_lb] @ z_lb[fin_lb])
                      + prog.constant)
    return SolveResult(status=Status.OPTIMAL, x=x, y_eq=y_eq, z_in=z_in, z_lb=z_lb, z_ub=z_ub,
                       objective=objective, dual_objective=dual_objective, iterations=it.iterations,
                       residuals={"primal": it.pres, "dual": it.dres, "gap": it.gap})
