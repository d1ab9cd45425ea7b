"""Small CSV/JSON helpers shared by the exporters.

All file output goes through these so that repeated runs are byte-identical:
floats are written with ``repr`` (shortest round-trip form) and JSON uses
``null`` for NaN.
"""

from __future__ import annotations

import json
import math
from pathlib import Path


def fmt(value) -> str:
    """Render a cell for CSV: full-precision floats, lowercase booleans."""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    x = float(value)
    if math.isnan(x):
        return "nan"
    return repr(x)


def write_csv(path, header: list[str], rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def json_ready(obj):
    """Recursively convert numpy scalars/arrays and NaN for strict JSON."""
    if isinstance(obj, dict):
        return {k: json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [json_ready(v) for v in obj]
    if hasattr(obj, "tolist"):  # numpy array or scalar
        return json_ready(obj.tolist())
    if isinstance(obj, float) and math.isnan(obj):
        return None
    return obj


def write_json(path, config: dict, result: dict) -> None:
    envelope = {"version": 1, "config": json_ready(config), "result": json_ready(result)}
    Path(path).write_text(json.dumps(envelope, indent=2, allow_nan=False) + "\n")
