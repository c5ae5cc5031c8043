"""Grid specs and deterministic CSV/JSON emission."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def parse_grid(spec) -> list[float]:
    """Parse ``"min:max:points[:log]"``, a comma list, or a single number."""
    if isinstance(spec, (int, float)):
        return [float(spec)]
    if isinstance(spec, (list, tuple)):
        return [float(v) for v in spec]
    text = str(spec).strip()
    if ":" in text:
        parts = text.split(":")
        if len(parts) not in (3, 4):
            raise ValueError(f"grid spec {spec!r} is not min:max:points[:log]")
        lo, hi, pts = float(parts[0]), float(parts[1]), int(parts[2])
        if pts < 1:
            raise ValueError("a grid needs at least one point")
        if len(parts) == 4:
            if parts[3] != "log":
                raise ValueError(f"unknown grid scale {parts[3]!r}")
            if lo <= 0 or hi <= 0:
                raise ValueError("log grids need positive end points")
            return [float(v) for v in np.logspace(math.log10(lo), math.log10(hi), pts)]
        return [float(v) for v in np.linspace(lo, hi, pts)]
    vals = [float(v) for v in text.split(",") if v.strip()]
    if not vals:
        raise ValueError("empty grid")
    return vals


def fmt(value) -> str:
    """17 significant digits for floats; ints and strings verbatim."""
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path, columns, rows, config: dict, version: str):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(f"# sparsespike {version} config={json.dumps(config, sort_keys=True)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([fmt(v) for v in row])


def read_csv(path):
    """(comment line, header, rows as lists of str)."""
    with Path(path).open() as fh:
        comment = fh.readline().rstrip("\n")
        r = csv.reader(fh)
        header = next(r)
        return comment, header, list(r)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_json(path, payload):
    text = json.dumps(_jsonable(payload), indent=2, sort_keys=True) + "\n"
    if path is None or str(path) == "-":
        return text
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return text
