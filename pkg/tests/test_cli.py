import csv
import json

from typer.testing import CliRunner

from ecoplus import __version__
from ecoplus.cli import app

runner = CliRunner()


def _run_dir(root):
    dirs = [p for p in root.iterdir() if p.is_dir()]
    assert len(dirs) == 1
    return dirs[0]


def _solve(tmp_path, *extra):
    out = tmp_path / "out"
    result = runner.invoke(app, ["solve", "--tm", "18", "--vd", "8", "--out", str(out), *extra])
    assert result.exit_code == 0, result.output
    return _run_dir(out)


def test_version():
    result = runner.invoke(app, ["version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_solve_writes_artifacts_and_validates(tmp_path):
    run = _solve(tmp_path, "--strategy", "ecoplus,vm", "--check")
    traj = run / "ecoplus_vd8_tm18.csv"
    assert traj.exists() and (run / "vm_vd8_tm18.csv").exists()
    for name in ("summary.json", "summary.md", "effective_config.json", "pwa_segments.csv"):
        assert (run / name).exists(), name
    summary = json.loads((run / "summary.json").read_text())
    assert summary["command"] == "solve" and summary["ok"]
    assert [s["strategy"] for s in summary["solutions"]] == ["ecoplus", "vm"]
    assert all(s["valid"] for s in summary["solutions"])

    result = runner.invoke(app, ["validate", str(traj)])
    assert result.exit_code == 0, result.output
    assert "satisfies every constraint" in result.output


def test_validate_names_the_broken_constraint(tmp_path):
    run = _solve(tmp_path)
    path = run / "ecoplus_vd8_tm18.csv"
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    rows[50][2] = str(float(rows[50][2]) + 0.5)
    with path.open("w", newline="") as fh:
        csv.writer(fh).writerows(rows)
    result = runner.invoke(app, ["validate", str(path)])
    assert result.exit_code == 1
    assert "dynamics_x" in result.output


def test_dump_program(tmp_path):
    run = _solve(tmp_path, "--strategy", "vm", "--dump-program")
    text = (run / "program_vm.mps").read_text()
    assert text.startswith("NAME ECOPLUS")
    assert "QUADOBJ" in text
    assert " v_1 v_1 0.2" in text and " v_180 v_180" not in text


def test_bad_config_exits_with_2(tmp_path):
    cfg = tmp_path / "bad.toml"
    cfg.write_text("[limits]\nv_max = -1\n")
    result = runner.invoke(app, ["solve", "--config", str(cfg), "--out", str(tmp_path / "out")])
    assert result.exit_code == 2
    assert "configuration error" in result.output


def test_unknown_strategy_exits_with_2(tmp_path):
    result = runner.invoke(app, ["solve", "--strategy", "cruise", "--out", str(tmp_path / "out")])
    assert result.exit_code == 2


def test_unknown_scenario_family(tmp_path):
    result = runner.invoke(app, ["scenario", "highway", "--out", str(tmp_path / "out")])
    assert result.exit_code == 2


def test_unreadable_trajectory(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("i,t,x,v,a,u,J\n")
    result = runner.invoke(app, ["validate", str(path)])
    assert result.exit_code == 2


def test_validate_takes_the_terminal_speed_from_the_file(tmp_path):
    out = tmp_path / "out"
    result = runner.invoke(app, ["solve", "--tm", "18", "--vd", "6", "--out", str(out)])
    assert result.exit_code == 0, result.output
    traj = _run_dir(out) / "ecoplus_vd6_tm18.csv"
    result = runner.invoke(app, ["validate", str(traj)])
    assert result.exit_code == 0, result.output
    assert "satisfies every constraint" in result.output


def _checks(summary):
    return {c["name"]: c["passed"] for c in summary["checks"]}


def test_sweep_writes_curves_and_checks(tmp_path, monkeypatch):
    monkeypatch.setenv("ECOPLUS_THREADS", "1")
    out = tmp_path / "out"
    result = runner.invoke(app, ["sweep", "--strategy", "ecoplus,vm", "--vd", "8", "--tm", "17.8",
                                 "--tm-max", "18.0", "--out", str(out), "--check"])
    run = _run_dir(out)
    summary = json.loads((run / "summary.json").read_text())
    assert result.exit_code == (0 if summary["ok"] else 1), result.output
    assert summary["command"] == "sweep"
    assert (run / "summary.md").exists()
    with (run / "vd_8" / "sweep.csv").open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 6
    assert {r["strategy"] for r in rows} == {"ecoplus", "vm"}
    assert all(r["status"] == "optimal" for r in rows)
    assert {c["strategy"] for c in summary["curves"]} == {"ecoplus", "vm"}
    assert all(c["feasible_points"] == 3 for c in summary["curves"])
    assert [r["strategy"] for r in summary["relative_differences"]] == ["vm"]
    checks = _checks(summary)
    for name in ("feasible-points", "solutions-valid", "unimodal", "feasibility-monotone"):
        assert checks[name], name
    assert "ecoplus-dominance" in checks


def test_leading_scenario_reports_the_time_gap(tmp_path, monkeypatch):
    monkeypatch.setenv("ECOPLUS_THREADS", "1")
    cfg = tmp_path / "leading.toml"
    cfg.write_text('[experiment]\ntm_min = 25.0\ntm_max = 25.1\nstrategies = ["ecoplus", "vm"]\n')
    out = tmp_path / "out"
    result = runner.invoke(app, ["scenario", "leading", "--config", str(cfg), "--tm", "25",
                                 "--out", str(out), "--check"])
    run = _run_dir(out)
    summary = json.loads((run / "summary.json").read_text())
    assert result.exit_code == (0 if summary["ok"] else 1), result.output
    assert summary["command"] == "scenario" and summary["family"] == "leading"
    assert (run / "leader.csv").exists()
    assert [g["time_gap"] for g in summary["time_gap"]] == [4.0, 0.0]
    assert all(g["status"] == "optimal" and g["safety_ok"] for g in summary["time_gap"])
    checks = _checks(summary)
    assert checks["feasible-points"] and checks["solutions-valid"]
