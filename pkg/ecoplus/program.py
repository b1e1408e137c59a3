from __future__ import annotations
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
import scipy.sparse as sps

# dense PSD check only below this size
_PSD_CHECK_MAX_N = 400


@dataclass(frozen=True)
class ConvexProgram:
    """min 1/2 x'Qx + c'x + constant
       s.t. A_eq x = b_eq, A_in x <= b_in, lb <= x <= ub.

    ``names`` maps a structural variable family (x, v, a, J, z, w) to the
    column indices of its members in grid order. ``eq_groups`` and
    ``in_groups`` map constraint families to half-open row ranges.
    ``meta`` carries builder context (grid step, strategy) for extraction."""
    c: np.ndarray
    A_eq: sps.csr_matrix
    b_eq: np.ndarray
    A_in: sps.csr_matrix
    b_in: np.ndarray
    lb: np.ndarray
    ub: np.ndarray
    Q: Optional[sps.csr_matrix] = None
    constant: float = 0.0
    names: Dict[str, np.ndarray] = field(default_factory=dict)
    eq_groups: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    in_groups: Dict[str, Tuple[int, int]] = field(default_factory=dict)
    meta: Dict[str, Any] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return int(self.c.size)

    @property
    def is_lp(self) -> bool:
        return self.Q is None or self.Q.nnz == 0

    def objective(self, x: np.ndarray) -> float:
        val = float(self.c @ x) + self.constant
        if self.Q is not None:
            val += 0.5 * float(x @ (self.Q @ x))
        return val

    def check(self) -> None:
        n = self.n
        if self.A_eq.shape[1] != n or self.A_in.shape[1] != n:
            raise ValueError("constraint matrices do not match the variable count")
        if self.A_eq.shape[0] != self.b_eq.size or self.A_in.shape[0] != self.b_in.size:
            raise ValueError("constraint right-hand sides do not match the row count")
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bound vectors do not match the variable count")
        if self.Q is not None:
            if self.Q.shape != (n, n):
                raise ValueError("Q has the wrong shape")
            asym = abs(self.Q - self.Q.T)
            if asym.nnz and asym.max() > 1e-12 * max(1.0, abs(self.Q).max()):
                raise ValueError("Q must be symmetric")
            if np.any(self.Q.diagonal() < 0):
                raise ValueError("Q must be positive semidefinite")
            if n <= _PSD_CHECK_MAX_N and self.Q.nnz:
                eig = np.linalg.eigvalsh(self.Q.toarray())
                if eig.min() < -1e-9 * max(1.0, eig.max()):
                    raise ValueError("Q must be positive semidefinite")
        covered = np.concatenate([idx for idx in self.names.values()]) if self.names else np.empty(0, int)
        if covered.size and (covered.min() < 0 or covered.max() >= n):
            raise ValueError("name map refers to columns outside the program")

    def variable_names(self) -> List[str]:
        out = [f"col_{j}" for j in range(self.n)]
        for fam, idx in self.names.items():
            for i, j in enumerate(idx):
                out[int(j)] = f"{fam}_{i}"
        return out

    def row_names(self) -> Tuple[List[str], List[str]]:
        def label(groups, m, prefix):
            out = [f"{prefix}_{r}" for r in range(m)]
            for g, (lo, hi) in groups.items():
                for r in range(lo, hi):
                    out[r] = f"{g}_{r - lo}"
            return out
        return label(self.eq_groups, self.b_eq.size, "eq"), label(self.in_groups, self.b_in.size, "in")
