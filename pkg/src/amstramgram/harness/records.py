"""On-disk formats for a single run: records CSV, RCE sidecar, summary JSON.

The records CSV starts with two comment lines (schema version, write time)
followed by a fixed header.  Floats are written with 17 significant digits
so they round-trip exactly; only the timestamp line differs between two
runs of the same configuration.
"""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

SCHEMA_VERSION = 1
SCHEMA_LINE = f"# amstramgram records schema {SCHEMA_VERSION}"
TIMESTAMP_PREFIX = "# written "
RECORD_COLUMNS = ("t", "train_loss", "rel_l2", "r_min", "r_max", "r_int", "r_eps", "elbow", "eta", "phase", "eta_min", "n_flat")
INT_COLUMNS = {"t", "r_min", "r_max", "r_int", "r_eps", "elbow", "n_flat"}
STR_COLUMNS = {"phase"}
RCE_COLUMNS = ("iteration", "N", "rce", "sigma")

RECORDS_FILE = "records.csv"
RCE_FILE = "rce_curves.csv"
SUMMARY_FILE = "summary.json"


def format_float(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def _parse_float(text: str) -> Optional[float]:
    return None if text == "" else float(text)


def write_records(path, records: Iterable, timestamp: Optional[str] = None) -> None:
    """Write one row per iteration record."""
    if timestamp is None:
        timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")
    buf = io.StringIO()
    buf.write(SCHEMA_LINE + "\n")
    buf.write(TIMESTAMP_PREFIX + timestamp + "\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RECORD_COLUMNS)
    for rec in records:
        row = []
        for col in RECORD_COLUMNS:
            v = getattr(rec, col)
            if col in INT_COLUMNS:
                row.append(str(int(v)))
            elif col in STR_COLUMNS:
                row.append(str(v))
            else:
                row.append(format_float(v))
        writer.writerow(row)
    Path(path).write_text(buf.getvalue())


def read_records(path) -> list[dict]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != SCHEMA_LINE:
        raise ValueError(f"{path}: not a records file of schema {SCHEMA_VERSION}")
    body = [ln for ln in lines if not ln.startswith("#")]
    reader = csv.DictReader(body)
    if tuple(reader.fieldnames or ()) != RECORD_COLUMNS:
        raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
    rows = []
    for raw in reader:
        row = {}
        for col in RECORD_COLUMNS:
            if col in INT_COLUMNS:
                row[col] = int(raw[col])
            elif col in STR_COLUMNS:
                row[col] = raw[col]
            else:
                row[col] = _parse_float(raw[col])
        rows.append(row)
    return rows


def strip_timestamp(text: str) -> str:
    return "\n".join(ln for ln in text.splitlines() if not ln.startswith(TIMESTAMP_PREFIX))


def write_rce_curves(path, records: Iterable) -> None:
    """Long-format sidecar: one row per (iteration, N); sigma is blank at N = 0."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(RCE_COLUMNS)
    for rec in records:
        if rec.rce is None:
            continue
        sigma = rec.singular_values
        for n, v in enumerate(rec.rce):
            writer.writerow([rec.t, n, format_float(v), format_float(sigma[n - 1]) if n > 0 else ""])
    Path(path).write_text(buf.getvalue())


def read_rce_curves(path) -> dict[int, tuple[np.ndarray, np.ndarray]]:
    """Map iteration -> (rce values over N = 0..r, singular values 1..r)."""
    curves: dict[int, tuple[list, list]] = {}
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RCE_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for raw in reader:
            rce, sigma = curves.setdefault(int(raw["iteration"]), ([], []))
            rce.append(float(raw["rce"]))
            if raw["sigma"] != "":
                sigma.append(float(raw["sigma"]))
    return {k: (np.array(v[0]), np.array(v[1])) for k, v in sorted(curves.items())}


def _jsonable(v):
    if isinstance(v, float) and not math.isfinite(v):
        return str(v)
    if isinstance(v, (np.floating, np.integer)):
        return _jsonable(v.item())
    return v


def write_summary(path, summary: dict) -> None:
    data = {k: _jsonable(v) for k, v in summary.items()}
    Path(path).write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")


def read_summary(path) -> dict:
    return json.loads(Path(path).read_text())
