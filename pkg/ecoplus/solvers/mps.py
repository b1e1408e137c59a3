"""Free-format MPS dump of a ConvexProgram."""
from __future__ import annotations
from pathlib import Path
from typing import List

import numpy as np
import scipy.sparse as sps

from ..program import ConvexProgram
from ..utils import atomic_write, fmt


def write_mps(prog: ConvexProgram, path: Path, name: str = "ECOPLUS") -> None:
    cols = prog.variable_names()
    eq_rows, in_rows = prog.row_names()
    lines: List[str] = [f"NAME {name}", "ROWS", " N obj"]
    lines += [f" E {r}" for r in eq_rows]
    lines += [f" L {r}" for r in in_rows]

    lines.append("COLUMNS")
    A_eq = sps.csc_matrix(prog.A_eq)
    A_in = sps.csc_matrix(prog.A_in)
    for j, col in enumerate(cols):
        if prog.c[j] != 0:
            lines.append(f" {col} obj {fmt(float(prog.c[j]))}")
        for mat, names in ((A_eq, eq_rows), (A_in, in_rows)):
            lo, hi = mat.indptr[j], mat.indptr[j + 1]
            for r, val in zip(mat.indices[lo:hi], mat.data[lo:hi]):
                if val != 0:
                    lines.append(f" {col} {names[r]} {fmt(float(val))}")

    lines.append("RHS")
    if prog.constant != 0:
        # MPS stores the negated objective constant on the objective row
        lines.append(f" rhs obj {fmt(-prog.constant)}")
    for names, rhs in ((eq_rows, prog.b_eq), (in_rows, prog.b_in)):
        for r, val in zip(names, rhs):
            if val != 0:
                lines.append(f" rhs {r} {fmt(float(val))}")

    lines.append("BOUNDS")
    for j, col in enumerate(cols):
        lo, hi = prog.lb[j], prog.ub[j]
        if np.isfinite(lo) and lo == hi:
            lines.append(f" FX bnd {col} {fmt(float(lo))}")
            continue
        if not np.isfinite(lo) and not np.isfinite(hi):
            lines.append(f" FR bnd {col}")
            continue
        if not np.isfinite(lo):
            lines.append(f" MI bnd {col}")
        elif lo != 0:
            lines.append(f" LO bnd {col} {fmt(float(lo))}")
        if np.isfinite(hi):
            lines.append(f" UP bnd {col} {fmt(float(hi))}")

    if not prog.is_lp:
        lines.append("QUADOBJ")
        Q = sps.triu(prog.Q).tocoo()
        for i, j, val in sorted(zip(Q.row, Q.col, Q.data)):
            if val != 0:
                lines.append(f" {cols[i]} {cols[j]} {fmt(float(val))}")
    lines.append("ENDATA")
    atomic_write(Path(path), "\n".join(lines) + "\n")
