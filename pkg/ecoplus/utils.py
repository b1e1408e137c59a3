from __future__ import annotations
import csv, io, json
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

from jsonschema import validate, Draft202012Validator

SCHEMA_DIR = Path(__file__).parent / "schemas"
SIG_DIGITS = 9


def atomic_write(path: Path, data: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data)
    tmp.replace(path)


def json_dump_atomic(path: Path, obj: Any) -> None:
    atomic_write(path, json.dumps(obj, indent=2, sort_keys=True))


def validate_json(obj: Any, schema_name: str) -> None:
    schema = json.loads((SCHEMA_DIR / schema_name).read_text())
    Draft202012Validator.check_schema(schema)
    validate(instance=obj, schema=schema)


def fmt(value: Any) -> str:
    """Float formatting shared by every artifact: 9 significant digits."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return f"{value:.{SIG_DIGITS}g}"
    try:
        return f"{float(value):.{SIG_DIGITS}g}"
    except (TypeError, ValueError):
        return str(value)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[Any]]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    atomic_write(path, buf.getvalue())


def read_csv(path: Path) -> Dict[str, List[Optional[str]]]:
    """Column-oriented read; empty cells come back as None."""
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValueError(f"{path}: missing header row")
        cols: Dict[str, List[Optional[str]]] = {name: [] for name in reader.fieldnames}
        for row in reader:
            for name in reader.fieldnames:
                cell = row.get(name)
                cols[name].append(cell if cell not in ("", None) else None)
    return cols
