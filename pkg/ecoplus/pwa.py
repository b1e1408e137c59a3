"""Secant over-approximation of the resistive deceleration on [0, v_max]."""
from __future__ import annotations
from dataclasses import dataclass
from pathlib import Path
from typing import Tuple

import numpy as np

from .errors import ModelError
from .models import ResistanceCoefficients
from .utils import write_csv

DOMAIN_TOL = 1e-9


@dataclass(frozen=True)
class PwaSegments:
    K: int
    v_max: float
    b1: np.ndarray
    b2: np.ndarray

    def __post_init__(self):
        for name in ("b1", "b2"):
            arr = np.array(getattr(self, name), dtype=float, copy=True)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dv(self) -> float:
        return self.v_max / self.K

    @property
    def knots(self) -> np.ndarray:
        return np.arange(self.K + 1) * self.dv


def build_pwa(coeffs: ResistanceCoefficients, v_max: float, K: int) -> PwaSegments:
    if K < 1:
        raise ModelError("at least one PWA segment is required")
    if v_max <= 0:
        raise ModelError("v_max must be positive")
    dv = v_max / K
    lo = np.arange(K) * dv
    hi = np.arange(1, K + 1) * dv
    b1 = (coeffs.decel(hi) - coeffs.decel(lo)) / dv
    b2 = coeffs.decel(lo) - b1 * lo
    return PwaSegments(K=K, v_max=v_max, b1=b1, b2=b2)


def pwa_eval(seg: PwaSegments, v):
    """max_k(b1_k v + b2_k); v must lie in [0, v_max]."""
    v = np.asarray(v, dtype=float)
    if np.any(v < -DOMAIN_TOL) or np.any(v > seg.v_max + DOMAIN_TOL):
        raise ModelError(f"velocity outside the PWA domain [0, {seg.v_max}]")
    vals = np.max(np.multiply.outer(v, seg.b1) + seg.b2, axis=-1)
    return vals if vals.ndim else float(vals)


def lower_support(coeffs: ResistanceCoefficients, v_max: float) -> Tuple[float, float]:
    """Tangent of a^r at v_max/2 as (slope, intercept): an affine under-estimate
    parallel to the end-point chord, touching a^r at mid-range."""
    m = 0.5 * v_max
    slope = float(coeffs.slope(m))
    return slope, float(coeffs.decel(m) - slope * m)


@dataclass(frozen=True)
class ApproximationErrorReport:
    samples: np.ndarray
    errors: np.ndarray
    max_abs_error: float
    max_rel_error: float
    argmax_abs: float


def approximation_error_report(seg: PwaSegments, coeffs: ResistanceCoefficients,
                               samples: int = 10_000) -> ApproximationErrorReport:
    if samples < 2:
        raise ValueError("need at least two samples")
    v = np.linspace(0.0, seg.v_max, samples)
    truth = coeffs.decel(v)
    err = pwa_eval(seg, v) - truth
    scale = np.abs(truth)
    rel = np.divide(err, scale, out=np.zeros_like(err), where=scale > 0)
    i = int(np.argmax(err))
    return ApproximationErrorReport(samples=v, errors=err, max_abs_error=float(err[i]),
                                    max_rel_error=float(np.max(rel)), argmax_abs=float(v[i]))


def write_segments_csv(path: Path, seg: PwaSegments) -> None:
    write_csv(Path(path), ["k", "b1", "b2"], ((k + 1, seg.b1[k], seg.b2[k]) for k in range(seg.K)))
