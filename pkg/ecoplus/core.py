from __future__ import annotations
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from .config import ConfigFile, effective_config
from .consumption import evaluate
from .dc import dc_solve, fit_surrogate, write_surrogate_csv
from .dynamics import derive_resistance_coefficients, write_trajectory_csv
from .experiments import (
    ScenarioReport, TradeoffCurve, compare_time_gap, pwa_study, run_scenario, scenario_spec,
)
from .experiments.leading import build_leading_profile
from .experiments.sweep import SWEEP_HEADER, SweepRecord
from .models import Strategy, StrategyKind
from .problem import build_problem, extract_solution
from .pwa import build_pwa, write_segments_csv
from .report.builder import build_report
from .solvers import solve, write_mps
from .utils import fmt, json_dump_atomic, validate_json, write_csv

log = logging.getLogger(__name__)

# strategies that the ECO+ curve must not lose to, point by point
DOMINATED = ("vm", "jm", "am", "dc")
PWA_FIDELITY_PCT = 1.0


def _check(name: str, passed: bool, detail: str = "") -> Dict[str, Any]:
    return {"name": name, "passed": bool(passed), "detail": detail}


def _tag(value: float) -> str:
    return fmt(value).replace(".", "p").replace("-", "m")


class Orchestrator:
    """One CLI run: a timestamped output directory, its artifacts and the summary."""

    def __init__(self, cfg: ConfigFile, out_root: Path = Path("out"), check: bool = False,
                 workers: Optional[int] = None):
        self.cfg = cfg
        self.out_root = Path(out_root)
        self.check = check
        self.workers = workers

        ts = datetime.now(timezone.utc).strftime("%Y%m%d_%H%M%S")
        outdir = self.out_root / ts
        n = 1
        while outdir.exists():
            outdir = self.out_root / f"{ts}_{n}"
            n += 1
        self.outdir = outdir
        self.outdir.mkdir(parents=True, exist_ok=False)

    # ------------------------------------------------------------ helpers

    def _prepare(self) -> None:
        json_dump_atomic(self.outdir / "effective_config.json", effective_config(self.cfg))
        coeffs = derive_resistance_coefficients(self.cfg.vehicle, self.cfg.road)
        write_segments_csv(self.outdir / "pwa_segments.csv",
                           build_pwa(coeffs, self.cfg.limits.v_max, self.cfg.pwa.segments))

    def _summary(self, command: str, family: str) -> Dict[str, Any]:
        return {
            "command": command,
            "family": family,
            "model": self.cfg.experiment.model,
            "outdir": str(self.outdir),
            "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
            "curves": [],
            "relative_differences": [],
            "solutions": [],
            "pwa": None,
            "time_gap": [],
            "checks": [],
            "ok": True,
        }

    def _write_trajectory(self, rec: SweepRecord, subdir: str = "trajectories") -> Optional[str]:
        if rec.trajectory is None:
            return None
        name = f"{rec.strategy}_vd{_tag(rec.vd)}_tm{_tag(rec.tm)}.csv"
        if subdir:
            name = f"{subdir}/{name}"
        write_trajectory_csv(self.outdir / name, rec.trajectory, rec.rates)
        return name

    def _write_curve(self, curve: TradeoffCurve) -> None:
        sub = f"vd_{_tag(curve.vd)}"
        write_csv(self.outdir / sub / "sweep.csv", SWEEP_HEADER, curve.rows())
        for rec in curve.records:
            if rec.feasible:
                self._write_trajectory(rec, f"{sub}/trajectories")

    def _curve_entries(self, report: ScenarioReport, summary: Dict[str, Any]) -> None:
        for vd, audits in report.audits.items():
            for a in audits.values():
                summary["curves"].append({
                    "vd": vd, "strategy": a.strategy, "feasible_points": a.feasible_points,
                    "min_consumption": a.min_consumption, "tm_at_min": a.tm_at_min, "unimodal": a.unimodal,
                    "feasibility_gaps": a.feasibility_gaps, "invalid_points": a.invalid_points,
                    "dominance_violations": a.dominance_violations,
                })
            for s, pct in report.relative[vd].items():
                summary["relative_differences"].append({
                    "vd": vd, "strategy": s, "base": report.base, "average_pct": pct,
                    "baseline_pct": report.baseline_relative.get(vd, {}).get(s),
                })

    def _curve_checks(self, report: ScenarioReport, summary: Dict[str, Any]) -> None:
        checks: List[Dict[str, Any]] = summary["checks"]
        curves = report.curves.values()
        checks.append(_check("feasible-points", all(not c.all_infeasible for c in curves)))
        bad = [f"{c['strategy']}@vd={fmt(c['vd'])}" for c in summary["curves"] if c["invalid_points"]]
        checks.append(_check("solutions-valid", not bad, ", ".join(bad)))
        bad = [f"{c['strategy']}@vd={fmt(c['vd'])}" for c in summary["curves"] if not c["unimodal"]]
        checks.append(_check("unimodal", not bad, ", ".join(bad)))
        bad = [f"{c['strategy']}@vd={fmt(c['vd'])}" for c in summary["curves"] if c["feasibility_gaps"]]
        checks.append(_check("feasibility-monotone", not bad, ", ".join(bad)))
        if report.base == "ecoplus":
            bad = [f"{c['strategy']}@vd={fmt(c['vd'])}: {len(c['dominance_violations'])}"
                   for c in summary["curves"] if c["strategy"] in DOMINATED and c["dominance_violations"]]
            checks.append(_check("ecoplus-dominance", not bad, ", ".join(bad)))
            six = [c for vd, c in report.curves.items() if abs(vd - 6.0) < 1e-9]
            if report.model == "cpem" and report.family == "single" and six:
                _, cons = six[0].series("ecoplus")
                checks.append(_check("regeneration", bool(cons.size) and float(cons.min()) < 0,
                                     f"min {fmt(float(cons.min())) if cons.size else 'n/a'} kWh"))
        if report.family == "comfort" and "dc" in self.cfg.experiment.strategies:
            shrinks = report.gap_shrinks("dc")
            checks.append(_check("comfort-gap-shrinks", all(v is True for v in shrinks.values()),
                                 ", ".join(f"vd={fmt(k)}: {v}" for k, v in shrinks.items())))

    def _finish(self, summary: Dict[str, Any]) -> Dict[str, Any]:
        summary["ok"] = all(c["passed"] for c in summary["checks"])
        summary = _plain(summary)
        validate_json(summary, "summary.schema.json")
        json_dump_atomic(self.outdir / "summary.json", summary)
        build_report(self.outdir, summary)
        return summary

    # ------------------------------------------------------------ commands

    def run_sweep(self, family: Optional[str] = None, command: str = "sweep") -> Dict[str, Any]:
        family = family or self.cfg.experiment.family
        self._prepare()
        report = run_scenario(self.cfg, family=family, workers=self.workers)
        summary = self._summary(command, family)
        for curve in report.curves.values():
            self._write_curve(curve)
        self._curve_entries(report, summary)
        if self.check:
            self._curve_checks(report, summary)
        if "dc" in self.cfg.experiment.strategies:
            write_surrogate_csv(self.outdir / "surrogate.csv",
                                fit_surrogate(self.cfg.vehicle, self.cfg.limits, self.cfg.road, self.cfg.dc))
        if family == "leading":
            summary["time_gap"] = self._time_gap(self.cfg.boundary.tm, report.leader)
            self._leader_csv(report.leader)
        return self._finish(summary)

    def run_scenario(self, family: str) -> Dict[str, Any]:
        return self.run_sweep(family=family, command="scenario")

    def run_pwa_study(self, vd: Optional[float] = None) -> Dict[str, Any]:
        self._prepare()
        study = pwa_study(self.cfg, vd=vd, workers=self.workers)
        summary = self._summary("pwa-study", "single")
        write_csv(self.outdir / "sweep.csv", SWEEP_HEADER, study.curve.rows())
        write_segments_csv(self.outdir / "pwa_segments_oracle.csv",
                           build_pwa(derive_resistance_coefficients(self.cfg.vehicle, self.cfg.road),
                                     self.cfg.limits.v_max, study.oracle_segments))
        summary["pwa"] = {
            "segments": study.segments, "oracle_segments": study.oracle_segments,
            "mean_objective_difference": study.mean_objective_difference,
            "mean_time_ratio": study.mean_time_ratio, "speedup": study.speedup,
            "max_abs_error": {str(k): r.max_abs_error for k, r in study.approximation.items()},
        }
        if self.check:
            diff, ratio = study.mean_objective_difference, study.mean_time_ratio
            summary["checks"].append(_check("pwa-fidelity", diff is not None and diff <= PWA_FIDELITY_PCT,
                                            f"{fmt(diff)}% (limit {PWA_FIDELITY_PCT}%)"))
            summary["checks"].append(_check("pwa-speed", ratio is not None and ratio < 1.0, f"ratio {fmt(ratio)}"))
        return self._finish(summary)

    def run_solve(self, strategies: Sequence[str], tm: float, vd: float, family: Optional[str] = None,
                  dump_program: bool = False) -> Dict[str, Any]:
        family = family or self.cfg.experiment.family
        self._prepare()
        summary = self._summary("solve", family)
        leader = build_leading_profile(self.cfg) if family == "leading" else None
        spec = scenario_spec(self.cfg, vd, tm, family, leader)
        solved = {}
        for label in strategies:
            strategy = Strategy.parse(label)
            entry: Dict[str, Any] = {"strategy": strategy.label, "tm": tm, "vd": vd, "file": None}
            if strategy.kind is StrategyKind.DC_SURROGATE:
                sur = fit_surrogate(self.cfg.vehicle, self.cfg.limits, self.cfg.road, self.cfg.dc)
                write_surrogate_csv(self.outdir / "surrogate.csv", sur)
                bundle = dc_solve(spec, sur, self.cfg.dc, init=solved.get("vm"), solver_opts=self.cfg.solver)
                status = "optimal" if bundle.diagnostics.get("converged") else "iteration-limit"
            else:
                prog = build_problem(spec, strategy)
                if dump_program:
                    write_mps(prog, self.outdir / f"program_{strategy.label}.mps")
                res = solve(prog, self.cfg.solver)
                status = res.status.value
                bundle = extract_solution(prog, res, spec.coeffs, spec.limits) if res.optimal else None
            entry["status"] = status
            if bundle is not None:
                solved[strategy.label] = bundle
                cons = evaluate(bundle.trajectory, self.cfg.vehicle, self.cfg.road.slope, self.cfg.road.gravity)
                check = bundle.validate(spec)
                rec = SweepRecord(tm=tm, strategy=strategy.label, model=self.cfg.experiment.model, vd=vd,
                                  status=status, trajectory=bundle.trajectory, rates=cons.rates)
                entry.update(consumption=cons.total, objective=bundle.objective, valid=check.ok,
                             violations=check.failures(), file=self._write_trajectory(rec, ""))
            summary["solutions"].append(entry)
        if family == "leading":
            summary["time_gap"] = self._time_gap(tm, leader)
            self._leader_csv(leader)
        if self.check:
            bad = [e["strategy"] for e in summary["solutions"] if e.get("valid") is not True]
            summary["checks"].append(_check("solutions-valid", not bad, ", ".join(bad)))
        return self._finish(summary)

    def _time_gap(self, tm: float, leader) -> List[Dict[str, Any]]:
        out = []
        for run in compare_time_gap(self.cfg, tm, leader=leader):
            if run.trajectory is not None:
                write_trajectory_csv(self.outdir / f"time_gap_{_tag(run.time_gap)}.csv", run.trajectory)
            out.append({"time_gap": run.time_gap, "status": run.status, "min_gap": run.min_gap,
                        "min_gap_time": run.min_gap_time, "first_brake_time": run.first_brake_time,
                        "safety_ok": run.safety_ok})
        return out

    def _leader_csv(self, leader) -> None:
        if leader is not None:
            write_trajectory_csv(self.outdir / "leader.csv", leader)


def _plain(obj: Any) -> Any:
    """numpy scalars and tuples to JSON-native values."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj
