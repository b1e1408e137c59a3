"""KKT residuals of a candidate point, for solutions produced here or elsewhere."""
from __future__ import annotations
import logging
import re
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ..program import ConvexProgram

log = logging.getLogger(__name__)

_SEP = re.compile(r"[\s,;]+")


def _norm(v: np.ndarray) -> float:
    return float(np.abs(v).max(initial=0.0))


def kkt_residuals(prog: ConvexProgram, x: np.ndarray, y_eq: Optional[np.ndarray] = None,
                  z_in: Optional[np.ndarray] = None, z_lb: Optional[np.ndarray] = None,
                  z_ub: Optional[np.ndarray] = None) -> Dict[str, float]:
    """Relative residuals in the solver's own convention.

    Dual residuals are computed only when every multiplier vector is given;
    multipliers of inequality rows and bounds are expected to be >= 0."""
    x = np.asarray(x, dtype=float)
    if x.size != prog.n:
        raise ValueError(f"primal vector has {x.size} entries, program has {prog.n} variables")
    out = {
        "equality": _norm(prog.A_eq @ x - prog.b_eq) / (1.0 + _norm(prog.b_eq)),
        "inequality": _norm(np.maximum(prog.A_in @ x - prog.b_in, 0.0)) / (1.0 + _norm(prog.b_in)),
        "bounds": _norm(np.maximum(np.maximum(prog.lb - x, x - prog.ub), 0.0)),
    }
    if any(v is None for v in (y_eq, z_in, z_lb, z_ub)):
        return out

    grad = prog.c.copy()
    if prog.Q is not None:
        grad = grad + prog.Q @ x
    r_d = grad + prog.A_eq.T @ y_eq + prog.A_in.T @ z_in + z_ub - z_lb
    out["stationarity"] = _norm(r_d) / (1.0 + _norm(prog.c))
    out["dual_sign"] = _norm(np.minimum(np.concatenate([z_in, z_lb, z_ub]), 0.0))

    slack_in = prog.b_in - prog.A_in @ x
    fin_lb, fin_ub = np.isfinite(prog.lb), np.isfinite(prog.ub)
    comp = np.concatenate([
        slack_in * z_in,
        (x - prog.lb)[fin_lb] * z_lb[fin_lb],
        (prog.ub - x)[fin_ub] * z_ub[fin_ub],
    ])
    out["complementarity"] = float(np.sum(np.abs(comp))) / (1.0 + abs(prog.objective(x)))
    return out


def _read_vector(path: Path) -> np.ndarray:
    text = Path(path).read_text()
    tokens = [t for t in _SEP.split(text) if t and not t.startswith("#")]
    try:
        return np.array([float(t) for t in tokens])
    except ValueError as exc:
        raise ValueError(f"{path}: {exc}") from None


def verify_solution(prog: ConvexProgram, primal_path: Path,
                    dual_path: Optional[Path] = None) -> Dict[str, float]:
    """Check an externally produced solution.

    ``primal_path`` holds n numbers separated by whitespace, commas or
    semicolons. ``dual_path`` holds y_eq, z_in, z_lb, z_ub concatenated in
    that order."""
    x = _read_vector(primal_path)
    if dual_path is None:
        res = kkt_residuals(prog, x)
    else:
        duals = _read_vector(dual_path)
        me, mi, n = prog.b_eq.size, prog.b_in.size, prog.n
        if duals.size != me + mi + 2 * n:
            raise ValueError(f"{dual_path}: expected {me + mi + 2 * n} multipliers, found {duals.size}")
        parts = np.split(duals, [me, me + mi, me + mi + n])
        res = kkt_residuals(prog, x, *parts)
    log.info("external solution residuals: %s", ", ".join(f"{k}={v:.3g}" for k, v in res.items()))
    return res
