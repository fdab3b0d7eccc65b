"""Bit-stable delimited and JSON output helpers.

Numbers are written with 17 significant digits so reruns of the same
configuration produce byte-identical files.
"""

from __future__ import annotations

import json
from pathlib import Path


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, (int,)):
        return str(x)
    if isinstance(x, str):
        return x
    return format(float(x), ".17g")


def write_csv(path, header, rows) -> None:
    path = Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def rows_to_json(header, rows) -> list:
    return [dict(zip(header, [_jsonable(v) for v in row])) for row in rows]


def _jsonable(v):
    if isinstance(v, (bool, int, str)):
        return v
    return float(v)


def write_json(path, obj) -> None:
    Path(path).write_text(
        json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8"
    )


def write_table(path_base, header, rows, output_format: str) -> Path:
    """Write a table as CSV or JSON depending on the requested format."""
    if output_format == "json":
        path = Path(str(path_base) + ".json")
        write_json(path, rows_to_json(header, [list(r) for r in rows]))
    else:
        path = Path(str(path_base) + ".csv")
        write_csv(path, header, rows)
    return path


def write_config_echo(path, values: dict) -> None:
    lines = [f"{k}={fmt(values[k])}" for k in sorted(values)]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")
