"""Table and report output: CSV (RFC 4180, 17 significant digits) and JSON."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Iterable, Sequence

import numpy as np


def fmt(x) -> str:
    """Render a number for CSV: integers as-is, floats with 17 significant digits."""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        f = float(x)
        if math.isnan(f):
            return "nan"
        if math.isinf(f):
            return "inf" if f > 0 else "-inf"
        return f"{f:.17g}"
    return str(x)


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(x) for x in row])
    return buf.getvalue()


def law_json(law: str, params: dict, values: Sequence) -> str:
    """``{"law": ..., "params": {...}, "values": [...]}``."""
    from .stats import _jsonable

    body = {"law": law, "params": _jsonable(params), "values": _jsonable(list(values))}
    return json.dumps(body, indent=2) + "\n"


def table_text(law: str, params: dict, header: Sequence[str], rows: list, fmt_name: str = "csv") -> str:
    if fmt_name == "csv":
        return csv_text(header, rows)
    if fmt_name == "json":
        values = [dict(zip(header, r)) for r in rows]
        return law_json(law, params, values)
    raise ValueError(f"unknown format {fmt_name!r}")


def samples_csv(values: np.ndarray) -> str:
    """``(replica, k, value)`` rows from a ``(replicas, K)`` array."""
    values = np.atleast_2d(values)
    rows = ((r, k + 1, values[r, k]) for r in range(values.shape[0]) for k in range(values.shape[1])
            if np.isfinite(values[r, k]))
    return csv_text(["replica", "k", "value"], rows)


def reports_json(reports, suite: str, seed: int | None) -> str:
    body = {
        "suite": suite,
        "seed": seed,
        "passed": all(r.passed for r in reports),
        "reports": [r.to_dict() for r in reports],
    }
    return json.dumps(body, indent=2) + "\n"


def reports_csv(reports) -> str:
    header = ["name", "statistic", "pvalue", "absError", "threshold", "pass", "replicas", "seed", "runtimeMs", "params"]
    rows = []
    for r in reports:
        d = r.to_dict()
        rows.append([
            d["name"], _blank(d["statistic"]), _blank(d["pvalue"]), _blank(d["absError"]),
            _blank(d["threshold"]), d["pass"], _blank(d["replicas"]), _blank(d["seed"]),
            _blank(d["runtimeMs"]), json.dumps(d["params"], sort_keys=True),
        ])
    return csv_text(header, rows)


def _blank(x):
    return "" if x is None else x
