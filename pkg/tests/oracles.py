"""Brute-force reference solvers for tiny dense programs.

Both enumerate active sets over the inequality rows and finite bounds, so
they are only usable for a handful of variables."""
from itertools import combinations
from typing import Optional, Tuple

import numpy as np
import scipy.sparse as sps

from ecoplus.program import ConvexProgram


def _stack(A_in, b_in, lb, ub):
    n = lb.size
    rows = [np.asarray(A_in, dtype=float).reshape(-1, n)]
    rhs = [np.asarray(b_in, dtype=float)]
    eye = np.eye(n)
    fin_ub = np.isfinite(ub)
    fin_lb = np.isfinite(lb)
    rows += [eye[fin_ub], -eye[fin_lb]]
    rhs += [ub[fin_ub], -lb[fin_lb]]
    return np.vstack(rows), np.concatenate(rhs)


def lp_vertex_oracle(c, A_in, b_in, lb, ub, tol: float = 1e-9) -> Optional[Tuple[float, np.ndarray]]:
    """min c'x over a bounded polytope by enumerating every vertex."""
    c = np.asarray(c, dtype=float)
    n = c.size
    G, h = _stack(A_in, b_in, lb, ub)
    best = None
    for active in combinations(range(G.shape[0]), n):
        Ga = G[list(active)]
        if abs(np.linalg.det(Ga)) < 1e-12:
            continue
        x = np.linalg.solve(Ga, h[list(active)])
        if np.all(G @ x <= h + tol * (1.0 + np.abs(h))):
            val = float(c @ x)
            if best is None or val < best[0]:
                best = (val, x)
    return best


def qp_active_set_oracle(Q, c, A_in, b_in, lb, ub, tol: float = 1e-9) -> Optional[Tuple[float, np.ndarray]]:
    """min 1/2 x'Qx + c'x for positive definite Q: the active set whose KKT
    point is primal feasible with non-negative multipliers."""
    Q = np.asarray(Q, dtype=float)
    c = np.asarray(c, dtype=float)
    n = c.size
    G, h = _stack(A_in, b_in, lb, ub)
    best = None
    for k in range(0, n + 1):
        for active in combinations(range(G.shape[0]), k):
            Ga = G[list(active)].reshape(k, n)
            K = np.block([[Q, Ga.T], [Ga, np.zeros((k, k))]])
            rhs = np.concatenate([-c, h[list(active)]])
            try:
                sol = np.linalg.solve(K, rhs)
            except np.linalg.LinAlgError:
                continue
            if not np.allclose(K @ sol, rhs, atol=1e-9):
                continue
            x, mu = sol[:n], sol[n:]
            if np.any(mu < -tol) or np.any(G @ x > h + tol * (1.0 + np.abs(h))):
                continue
            val = float(0.5 * x @ Q @ x + c @ x)
            if best is None or val < best[0]:
                best = (val, x)
    return best


def make_program(c, A_eq=None, b_eq=None, A_in=None, b_in=None, lb=None, ub=None, Q=None) -> ConvexProgram:
    c = np.asarray(c, dtype=float)
    n = c.size
    A_eq = sps.csr_matrix(np.zeros((0, n)) if A_eq is None else np.asarray(A_eq, dtype=float))
    A_in = sps.csr_matrix(np.zeros((0, n)) if A_in is None else np.asarray(A_in, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    b_in = np.zeros(0) if b_in is None else np.asarray(b_in, dtype=float)
    lb = np.full(n, -np.inf) if lb is None else np.asarray(lb, dtype=float)
    ub = np.full(n, np.inf) if ub is None else np.asarray(ub, dtype=float)
    Q = None if Q is None else sps.csr_matrix(np.asarray(Q, dtype=float))
    return ConvexProgram(c=c, A_eq=A_eq, b_eq=b_eq, A_in=A_in, b_in=b_in, lb=lb, ub=ub, Q=Q)
