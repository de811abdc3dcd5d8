"""
CSV Schema Utility.
Column layouts of every CSV the tool writes, plus read/write helpers.
All files start with a '# schema=1' comment line followed by the header.
"""
import csv
import math
import os
from typing import Dict, Iterable, List, Sequence

SCHEMA_VERSION = 1
SCHEMA_LINE = f"# schema={SCHEMA_VERSION}"

SOLUTION_COLUMNS = ["field", "index", "real", "imag"]
TRACE_COLUMNS = ["outer", "inner", "F", "violation", "rho"]
RUNS_COLUMNS = [
    "realization", "scheme", "sweep_value", "gain_db", "min_sinr_slack_db",
    "violation", "outer_iters", "inner_iters_total", "wall_ms", "status",
]
SUMMARY_COLUMNS = [
    "sweep_value", "scheme", "mean_gain_db", "std_gain_db", "n_used", "n_total",
    "mean_min_sinr_slack_db", "mean_wall_ms",
]
SWEEP_COLUMNS = ["theta_deg", "gain_db"]


def format_value(value) -> str:
    """Floats use repr-exact 17 significant digits; everything else str()."""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return format(value, ".17g")
    if hasattr(value, "item"):
        return format_value(value.item())
    return str(value)


def write_rows(path: str, columns: Sequence[str], rows: Iterable[Dict]):
    """
    Write rows under the versioned header.

    Args:
        path: Output file path (parent directories are created)
        columns: Column order
        rows: Dicts keyed by column name
    """
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(SCHEMA_LINE + "\n")
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(row.get(column, "")) for column in columns])


def read_rows(path: str) -> List[Dict[str, str]]:
    """Read a schema-versioned CSV, skipping comment lines. Values stay strings."""
    with open(path, "r", encoding="utf-8", newline="") as f:
        lines = [line for line in f if not line.startswith("#")]
    return list(csv.DictReader(lines))


def solution_rows(result) -> List[Dict]:
    """Positions, beamformer entries, per-user SINR and gain of one result."""
    rows = []
    for p, position in enumerate(result.t):
        rows.append({"field": "position", "index": p, "real": float(position), "imag": 0.0})
    W_D = result.W_D
    for n in range(W_D.shape[0]):
        for k in range(W_D.shape[1]):
            rows.append({"field": "w", "index": f"{n}:{k}",
                         "real": float(W_D[n, k].real), "imag": float(W_D[n, k].imag)})
    for k, value in enumerate(result.sinr_db):
        rows.append({"field": "sinr_db", "index": k, "real": float(value), "imag": 0.0})
    rows.append({"field": "gain_db", "index": 0, "real": float(result.gain_db), "imag": 0.0})
    return rows


def trace_rows(result) -> List[Dict]:
    return [{"outer": r.outer, "inner": r.inner, "F": float(r.F), "violation": float(r.violation),
             "rho": float(r.rho)} for r in result.trace]
