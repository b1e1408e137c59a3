from .leading import build_leading_profile
from .scenarios import PwaStudy, ScenarioReport, TimeGapRun, compare_time_gap, pwa_study, run_scenario
from .sweep import (
    SWEEP_HEADER, CurveAudit, SweepRecord, TradeoffCurve, audit_curve, average_relative_difference,
    dominance_violations, feasibility_gaps, is_unimodal, min_feasible_tm, relative_differences,
    scenario_spec, solve_point, tm_grid, tradeoff_sweep,
)
