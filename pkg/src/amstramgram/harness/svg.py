"""Minimal static SVG line charts.

Output depends only on the input data: coordinates are printed with two
decimals and no timestamps or ids are embedded, so identical inputs give
identical bytes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 72, 150, 36, 52
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass(frozen=True)
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]
    color: Optional[str] = None
    dashed: bool = False


@dataclass(frozen=True)
class HLine:
    label: str
    y: float
    color: str = "#555555"


def _f(v: float) -> str:
    return f"{v:.2f}"


def _nice_step(span: float, target: int = 6) -> float:
    raw = span / target
    mag = 10 ** math.floor(math.log10(raw))
    for m in (1, 2, 5, 10):
        if m * mag >= raw:
            return m * mag
    return 10 * mag


def _linear_ticks(lo: float, hi: float) -> list[float]:
    step = _nice_step(hi - lo)
    first = math.ceil(lo / step - 1e-9) * step
    ticks = []
    v = first
    while v <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return ticks


def _tick_label(v: float) -> str:
    if v == int(v) and abs(v) < 1e6:
        return str(int(v))
    return f"{v:.3g}"


def _segments(xs, ys, log_y: bool):
    """Split into runs of plottable points (finite, and positive on log axes)."""
    runs, cur = [], []
    for x, y in zip(xs, ys):
        ok = y is not None and math.isfinite(y) and math.isfinite(x) and (y > 0 or not log_y)
        if ok:
            cur.append((float(x), math.log10(y) if log_y else float(y)))
        elif cur:
            runs.append(cur)
            cur = []
    if cur:
        runs.append(cur)
    return runs


def line_chart(series: Sequence[Series], *, title: str, xlabel: str, ylabel: str,
               log_y: bool = True, hlines: Sequence[HLine] = ()) -> str:
    runs = [(s, _segments(s.xs, s.ys, log_y)) for s in series]
    pts = [p for _, rs in runs for r in rs for p in r]
    hl = []
    for h in hlines:
        if math.isfinite(h.y) and (h.y > 0 or not log_y):
            hl.append((h, math.log10(h.y) if log_y else h.y))
    xs = [p[0] for p in pts] or [0.0, 1.0]
    ys = [p[1] for p in pts] + [v for _, v in hl] or [0.0, 1.0]
    x0, x1 = min(xs), max(xs)
    y0, y1 = min(ys), max(ys)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if log_y:
        y0, y1 = math.floor(y0), math.ceil(y1)
        if y1 == y0:
            y0, y1 = y0 - 1, y1 + 1
    elif y1 == y0:
        y0, y1 = y0 - 1.0, y1 + 1.0

    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def px(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def py(y):
        return TOP + (y1 - y) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{_f(LEFT + pw / 2)}" y="20" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]

    if log_y:
        decades = int(y1 - y0)
        stride = max(1, math.ceil(decades / 8))
        yticks = [(float(k), f"1e{k}") for k in range(int(y0), int(y1) + 1, stride)]
    else:
        yticks = [(v, _tick_label(v)) for v in _linear_ticks(y0, y1)]
    for v, label in yticks:
        y = py(v)
        out.append(f'<line x1="{LEFT - 4}" y1="{_f(y)}" x2="{LEFT + pw}" y2="{_f(y)}" stroke="#e5e5e5"/>')
        out.append(f'<text x="{LEFT - 6}" y="{_f(y + 4)}" text-anchor="end">{label}</text>')
    for v in _linear_ticks(x0, x1):
        x = px(v)
        out.append(f'<line x1="{_f(x)}" y1="{TOP + ph}" x2="{_f(x)}" y2="{TOP + ph + 4}" stroke="black"/>')
        out.append(f'<text x="{_f(x)}" y="{TOP + ph + 16}" text-anchor="middle">{_tick_label(v)}</text>')
    out.append(f'<text x="{_f(LEFT + pw / 2)}" y="{HEIGHT - 12}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="16" y="{_f(TOP + ph / 2)}" text-anchor="middle" transform="rotate(-90 16 {_f(TOP + ph / 2)})">{escape(ylabel)}</text>')

    legend = []
    for h, v in hl:
        y = py(v)
        out.append(f'<line x1="{LEFT}" y1="{_f(y)}" x2="{LEFT + pw}" y2="{_f(y)}" stroke="{h.color}" stroke-dasharray="2,3"/>')
        legend.append((h.label, h.color, "2,3"))
    for i, (s, rs) in enumerate(runs):
        color = s.color or PALETTE[i % len(PALETTE)]
        dash = ' stroke-dasharray="6,3"' if s.dashed else ""
        for r in rs:
            coords = " ".join(f"{_f(px(x))},{_f(py(y))}" for x, y in r)
            if len(r) == 1:
                out.append(f'<circle cx="{_f(px(r[0][0]))}" cy="{_f(py(r[0][1]))}" r="2" fill="{color}"/>')
            else:
                out.append(f'<polyline points="{coords}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>')
        legend.append((s.label, color, "6,3" if s.dashed else None))

    lx = LEFT + pw + 10
    for i, (label, color, dash) in enumerate(legend):
        y = TOP + 10 + 16 * i
        d = f' stroke-dasharray="{dash}"' if dash else ""
        out.append(f'<line x1="{lx}" y1="{y}" x2="{lx + 20}" y2="{y}" stroke="{color}" stroke-width="1.5"{d}/>')
        out.append(f'<text x="{lx + 26}" y="{y + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def loss_chart(rows: Sequence[dict], title: str = "training history") -> str:
    """Train loss and relative L2 error against iteration, log scale."""
    t = [r["t"] for r in rows]
    series = [Series("train loss", t, [r["train_loss"] for r in rows])]
    if any(r.get("rel_l2") is not None for r in rows):
        series.append(Series("relative L2", t, [r.get("rel_l2") for r in rows]))
    return line_chart(series, title=title, xlabel="iteration", ylabel="value", log_y=True)


def rce_chart(rce, sigma, eps: Optional[float], iteration: int, r_min: Optional[int] = None) -> str:
    """RCE curve over N with the singular values overlaid and the precision line."""
    rce = np.asarray(rce, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    series = [
        Series("RCE_N", range(len(rce)), rce),
        Series("sigma_N", range(1, len(sigma) + 1), sigma, dashed=True),
    ]
    hlines = [HLine("eps", eps)] if eps else []
    title = f"reconstruction error, iteration {iteration}"
    if r_min is not None:
        title += f" (r_min = {r_min})"
    return line_chart(series, title=title, xlabel="N", ylabel="value", log_y=True, hlines=hlines)
