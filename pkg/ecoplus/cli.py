from __future__ import annotations
import logging
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, List, Optional

import typer
from rich import print
from rich.console import Console
from rich.logging import RichHandler
from rich.table import Table

from .config import ConfigFile, apply_overrides, load_config
from .core import Orchestrator
from .dynamics import read_trajectory_csv, validate_trajectory
from .errors import ConfigError, ExtractionError, ModelError, SolverError
from .experiments import build_leading_profile, scenario_spec

app = typer.Typer(help="ECO+ eco-driving trajectory optimization", no_args_is_help=True)
console = Console(stderr=True)

EXIT_CHECK = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3

ConfigOpt = typer.Option(None, "--config", help="TOML run configuration")
ModelOpt = typer.Option(None, "--model", help="cpem | kmmk")
StrategyOpt = typer.Option(None, "--strategy", help="comma list: ecoplus, ecoplus-oracle, vm, jm, am, dc, vm_l1, am_l1, va, um")
VdOpt = typer.Option(None, "--vd", help="comma list of terminal velocities [m/s]")
TmMaxOpt = typer.Option(None, "--tm-max", help="largest travel time of a sweep [s]")
DtOpt = typer.Option(None, "--dt", help="grid step [s]")
SegmentsOpt = typer.Option(None, "--segments", help="PWA segment count K")
OutOpt = typer.Option("out", "--out", help="Output root folder")
CheckOpt = typer.Option(False, "--check", help="evaluate acceptance checks; exit 1 when one fails")
VerboseOpt = typer.Option(False, "--verbose", "-v", help="debug logging")


def _setup_logging(verbose: bool) -> None:
    logging.basicConfig(level=logging.DEBUG if verbose else logging.INFO, format="%(message)s",
                        handlers=[RichHandler(console=console, show_path=False)], force=True)


def _split(text: Optional[str]) -> Optional[List[str]]:
    if text is None:
        return None
    return [t.strip() for t in text.split(",") if t.strip()]


def _floats(text: Optional[str]) -> Optional[List[float]]:
    items = _split(text)
    if items is None:
        return None
    try:
        return [float(t) for t in items]
    except ValueError:
        raise ConfigError(f"expected a comma separated list of numbers, got '{text}'") from None


@contextmanager
def _guard():
    try:
        yield
    except (ConfigError, ModelError) as exc:
        print(f"[bold red]configuration error[/bold red]: {exc}")
        raise typer.Exit(EXIT_CONFIG)
    except (SolverError, ExtractionError) as exc:
        print(f"[bold red]solver failure[/bold red]: {exc}")
        raise typer.Exit(EXIT_SOLVER)


def _load(config: Optional[Path], **overrides: Any) -> ConfigFile:
    cfg = load_config(config)
    return apply_overrides(cfg, overrides)


def _common(model, strategy, vd, tm_max, dt, segments, family=None, tm_min=None) -> Dict[str, Any]:
    return {
        "experiment.model": model,
        "experiment.strategies": _split(strategy),
        "experiment.vd": _floats(vd),
        "experiment.tm_max": tm_max,
        "experiment.tm_min": tm_min,
        "experiment.dt": dt,
        "experiment.family": family,
        "pwa.segments": segments,
    }


def _finish(summary: Dict[str, Any], check: bool) -> None:
    if summary["relative_differences"]:
        table = Table(title="average relative difference")
        for col in ("vd", "strategy", "vs", "average"):
            table.add_column(col)
        for r in summary["relative_differences"]:
            pct = "n/a" if r["average_pct"] is None else f"{r['average_pct']:.2f}%"
            table.add_row(f"{r['vd']:g}", r["strategy"], r["base"], pct)
        print(table)
    if summary["solutions"]:
        table = Table(title="solutions")
        for col in ("strategy", "tm", "status", "consumption", "valid"):
            table.add_column(col)
        for s in summary["solutions"]:
            cons = s.get("consumption")
            table.add_row(s["strategy"], f"{s['tm']:g}", s["status"],
                          "n/a" if cons is None else f"{cons:.6g}", str(s.get("valid")))
        print(table)
    for c in summary["checks"]:
        mark = "[green]pass[/green]" if c["passed"] else "[red]FAIL[/red]"
        print(f"{mark} {c['name']} {c.get('detail') or ''}")
    print(f"[bold green]Run completed[/bold green] → {summary['outdir']}")
    if check and not summary["ok"]:
        raise typer.Exit(EXIT_CHECK)


@app.command()
def sweep(
    config: Optional[Path] = ConfigOpt,
    model: Optional[str] = ModelOpt,
    strategy: Optional[str] = StrategyOpt,
    vd: Optional[str] = VdOpt,
    tm: Optional[float] = typer.Option(None, "--tm", help="first travel time of the sweep (default: smallest feasible)"),
    tm_max: Optional[float] = TmMaxOpt,
    dt: Optional[float] = DtOpt,
    segments: Optional[int] = SegmentsOpt,
    family: Optional[str] = typer.Option(None, "--family", help="single | leading | comfort"),
    out: str = OutOpt,
    check: bool = CheckOpt,
    verbose: bool = VerboseOpt,
):
    """Consumption versus travel-time curves for every strategy and terminal velocity."""
    _setup_logging(verbose)
    with _guard():
        cfg = _load(config, **_common(model, strategy, vd, tm_max, dt, segments, family, tm))
        summary = Orchestrator(cfg, out_root=Path(out), check=check).run_sweep()
    _finish(summary, check)


@app.command()
def scenario(
    family: str = typer.Argument(..., help="leading | comfort"),
    config: Optional[Path] = ConfigOpt,
    model: Optional[str] = ModelOpt,
    strategy: Optional[str] = StrategyOpt,
    tm: Optional[float] = typer.Option(None, "--tm", help="travel time of the time-gap comparison [s]"),
    tm_max: Optional[float] = TmMaxOpt,
    dt: Optional[float] = DtOpt,
    segments: Optional[int] = SegmentsOpt,
    out: str = OutOpt,
    check: bool = CheckOpt,
    verbose: bool = VerboseOpt,
):
    """Leading-vehicle or tight-comfort study."""
    _setup_logging(verbose)
    with _guard():
        if family not in ("leading", "comfort"):
            raise ConfigError(f"scenario family must be leading or comfort, got '{family}'")
        overrides = _common(model, strategy, None, tm_max, dt, segments, family)
        overrides["boundary.tm"] = tm
        cfg = _load(config, **overrides)
        summary = Orchestrator(cfg, out_root=Path(out), check=check).run_scenario(family)
    _finish(summary, check)


@app.command("pwa-study")
def pwa_study(
    config: Optional[Path] = ConfigOpt,
    model: Optional[str] = ModelOpt,
    vd: Optional[float] = typer.Option(None, "--vd", help="terminal velocity of the study sweep [m/s]"),
    tm_max: Optional[float] = TmMaxOpt,
    dt: Optional[float] = DtOpt,
    segments: Optional[int] = SegmentsOpt,
    out: str = OutOpt,
    check: bool = CheckOpt,
    verbose: bool = VerboseOpt,
):
    """ECO+ with K segments against the fine-PWA oracle: objective fidelity and solve time."""
    _setup_logging(verbose)
    with _guard():
        cfg = _load(config, **_common(model, None, None, tm_max, dt, segments))
        summary = Orchestrator(cfg, out_root=Path(out), check=check).run_pwa_study(vd)
    pwa = summary["pwa"]
    diff = pwa["mean_objective_difference"]
    print(f"K={pwa['segments']} vs K={pwa['oracle_segments']}: "
          f"objective difference {'n/a' if diff is None else f'{diff:.3f}%'}")
    _finish(summary, check)


@app.command()
def solve(
    config: Optional[Path] = ConfigOpt,
    model: Optional[str] = ModelOpt,
    strategy: Optional[str] = typer.Option("ecoplus", "--strategy", help="comma list of strategies"),
    vd: Optional[float] = typer.Option(None, "--vd", help="terminal velocity [m/s]"),
    tm: Optional[float] = typer.Option(None, "--tm", help="travel time [s]"),
    dt: Optional[float] = DtOpt,
    segments: Optional[int] = SegmentsOpt,
    family: Optional[str] = typer.Option(None, "--family", help="single | leading | comfort"),
    dump_program: bool = typer.Option(False, "--dump-program", help="write program_<strategy>.mps"),
    out: str = OutOpt,
    check: bool = CheckOpt,
    verbose: bool = VerboseOpt,
):
    """Solve one travel time and write the trajectories."""
    _setup_logging(verbose)
    with _guard():
        overrides = _common(model, strategy, None, None, dt, segments, family)
        overrides.update({"boundary.vd": vd, "boundary.tm": tm})
        cfg = _load(config, **overrides)
        summary = Orchestrator(cfg, out_root=Path(out), check=check).run_solve(
            cfg.experiment.strategies, cfg.boundary.tm, cfg.boundary.vd, dump_program=dump_program)
    _finish(summary, check)


@app.command()
def validate(
    path: Path = typer.Argument(..., help="trajectory CSV (i,t,x,v,a,u,J[,rate])"),
    config: Optional[Path] = ConfigOpt,
    model: Optional[str] = ModelOpt,
    vd: Optional[float] = typer.Option(None, "--vd", help="terminal velocity [m/s] (default: from the file)"),
    tm: Optional[float] = typer.Option(None, "--tm", help="travel time [s] (default: from the file)"),
    family: Optional[str] = typer.Option(None, "--family", help="single | leading | comfort"),
    tol: float = typer.Option(1e-6, "--tol", help="residual tolerance"),
    verbose: bool = VerboseOpt,
):
    """Re-check a trajectory CSV against the configured constraints."""
    _setup_logging(verbose)
    with _guard():
        try:
            traj = read_trajectory_csv(path)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read trajectory: {exc}") from exc
        cfg = _load(config, **{"experiment.model": model, "experiment.dt": traj.dt, "experiment.family": family})
        tm_eff = tm if tm is not None else traj.H * traj.dt
        vd_eff = vd if vd is not None else float(traj.v[-1])
        fam = cfg.experiment.family
        leader = build_leading_profile(cfg) if fam == "leading" else None
        spec = scenario_spec(cfg, vd_eff, tm_eff, fam, leader)
        report = validate_trajectory(traj, spec.road, spec.boundary, spec.limits, spec.coeffs,
                                     safety=spec.safety, tol=tol)
    table = Table(title=str(path))
    for col in ("check", "residual", "index", "result"):
        table.add_column(col)
    for name, c in report.checks.items():
        table.add_row(name, f"{c.residual:.3g}", "" if c.index is None else str(c.index),
                      "[green]ok[/green]" if c.passed else "[red]violated[/red]")
    print(table)
    if not report.ok:
        print(f"[bold red]violated[/bold red]: {', '.join(report.failures())}")
        raise typer.Exit(EXIT_CHECK)
    print("[bold green]trajectory satisfies every constraint[/bold green]")


@app.command()
def version():
    from . import __version__
    print(__version__)


if __name__ == "__main__":
    app()
