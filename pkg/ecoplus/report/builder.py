from __future__ import annotations
from pathlib import Path
from typing import Any, Dict

from jinja2 import Environment, FileSystemLoader, select_autoescape

from ..utils import atomic_write, fmt

TEMPLATE_DIR = Path(__file__).parent / "templates"


def _pct(value) -> str:
    return "n/a" if value is None else f"{value:.2f}%"


def build_report(outdir: Path, summary: Dict[str, Any]) -> Path:
    env = Environment(
        loader=FileSystemLoader(str(TEMPLATE_DIR)),
        autoescape=select_autoescape(),
        trim_blocks=True,
        lstrip_blocks=True,
    )
    env.filters["num"] = lambda v: "n/a" if v is None else fmt(v)
    env.filters["pct"] = _pct
    md = env.get_template("summary.md.j2").render(s=summary)
    path = Path(outdir) / "summary.md"
    atomic_write(path, md)
    return path
