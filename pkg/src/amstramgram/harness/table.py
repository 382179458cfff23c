"""Aggregate run summaries into a per-problem mean/std table."""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .records import SUMMARY_FILE, read_summary

logger = logging.getLogger(__name__)

TABLE_COLUMNS = ("problem", "strategy", "seeds", "failed", "mse_mean", "mse_std", "rel_l2_mean", "rel_l2_std")


@dataclass(frozen=True)
class SummaryRow:
    problem: str
    strategy: str
    seeds: int
    failed: int
    mse_mean: float
    mse_std: float
    rel_l2_mean: float
    rel_l2_std: float


def collect_summaries(dirs: Iterable) -> tuple[list[dict], list[Path]]:
    """Load every summary under the given directories; returns (summaries, dirs without any)."""
    found, missing = [], []
    for d in dirs:
        d = Path(d)
        files = [d / SUMMARY_FILE] if (d / SUMMARY_FILE).is_file() else sorted(d.rglob(SUMMARY_FILE))
        if not files:
            logger.warning("no %s under %s; skipped", SUMMARY_FILE, d)
            missing.append(d)
        for f in files:
            try:
                found.append(read_summary(f))
            except (OSError, ValueError) as exc:
                logger.warning("unreadable summary %s (%s); skipped", f, exc)
                missing.append(f)
    return found, missing


def mean_std(values) -> tuple[float, float]:
    """Mean and population standard deviation (ddof = 0) of the finite values."""
    v = np.array([x for x in values if x is not None and math.isfinite(x)], dtype=float)
    if v.size == 0:
        return math.nan, math.nan
    return float(v.mean()), float(v.std())


def _as_float(x) -> Optional[float]:
    if x is None:
        return None
    try:
        return float(x)
    except (TypeError, ValueError):
        return None


def summarize(summaries: Iterable[dict]) -> list[SummaryRow]:
    groups: dict[tuple[str, str], list[dict]] = {}
    for s in summaries:
        groups.setdefault((s.get("problem", "?"), s.get("strategy", "?")), []).append(s)
    rows = []
    for key in sorted(groups):
        ok = [s for s in groups[key] if s.get("status") == "ok"]
        mse = mean_std(_as_float(s.get("final_mse")) for s in ok)
        l2 = mean_std(_as_float(s.get("final_rel_l2")) for s in ok)
        rows.append(SummaryRow(key[0], key[1], len(ok), len(groups[key]) - len(ok), *mse, *l2))
    return rows


def sci(x: float) -> str:
    return "nan" if not math.isfinite(x) else f"{x:.2e}"


def _cells(row: SummaryRow) -> list[str]:
    return [row.problem, row.strategy, str(row.seeds), str(row.failed),
            sci(row.mse_mean), sci(row.mse_std), sci(row.rel_l2_mean), sci(row.rel_l2_std)]


def render_text(rows: list[SummaryRow]) -> str:
    table = [list(TABLE_COLUMNS)] + [_cells(r) for r in rows]
    widths = [max(len(line[i]) for line in table) for i in range(len(TABLE_COLUMNS))]
    lines = ["  ".join(c.ljust(w) if i < 2 else c.rjust(w) for i, (c, w) in enumerate(zip(line, widths))).rstrip()
             for line in table]
    return "\n".join(lines) + "\n"


def render_csv(rows: list[SummaryRow]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(TABLE_COLUMNS)
    for r in rows:
        w.writerow(_cells(r))
    return buf.getvalue()
