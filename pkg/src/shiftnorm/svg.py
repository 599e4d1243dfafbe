"""Minimal SVG line charts for refinement tables."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _ticks(lo: float, hi: float, log: bool) -> list[float]:
    if log:
        return [10.0 ** k for k in range(math.floor(lo), math.ceil(hi) + 1)]
    step = (hi - lo) / 4 or 1.0
    return [lo + k * step for k in range(5)]


def line_chart(series: dict, title: str, xlabel: str, ylabel: str, logx: bool = True,
               logy: bool = True, width: int = 480, height: int = 320) -> str:
    """``series`` maps a label to ``(xs, ys)``; nonpositive values are dropped on log axes."""
    pad_l, pad_r, pad_t, pad_b = 64, 16, 32, 48
    tx = (lambda v: math.log10(v)) if logx else (lambda v: v)
    ty = (lambda v: math.log10(v)) if logy else (lambda v: v)
    pts = {}
    for name, (xs, ys) in series.items():
        pts[name] = [(tx(x), ty(y)) for x, y in zip(xs, ys)
                     if (x > 0 or not logx) and (y > 0 or not logy)
                     and math.isfinite(x) and math.isfinite(y)]
    allp = [p for ps in pts.values() for p in ps] or [(0.0, 0.0), (1.0, 1.0)]
    x0, x1 = min(p[0] for p in allp), max(p[0] for p in allp)
    y0, y1 = min(p[1] for p in allp), max(p[1] for p in allp)
    if x1 == x0:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pw, ph = width - pad_l - pad_r, height - pad_t - pad_b

    def sx(v):
        return pad_l + (v - x0) / (x1 - x0) * pw

    def sy(v):
        return pad_t + (1 - (v - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{width / 2:.1f}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
           f'<rect x="{pad_l}" y="{pad_t}" width="{pw}" height="{ph}" fill="none" stroke="#444"/>']
    for v in _ticks(x0, x1, logx):
        tv = tx(v) if logx else v
        if x0 - 1e-9 <= tv <= x1 + 1e-9:
            out.append(f'<text x="{sx(tv):.1f}" y="{pad_t + ph + 14}" text-anchor="middle">{v:.3g}</text>')
    for v in _ticks(y0, y1, logy):
        tv = ty(v) if logy else v
        if y0 - 1e-9 <= tv <= y1 + 1e-9:
            out.append(f'<text x="{pad_l - 4}" y="{sy(tv) + 4:.1f}" text-anchor="end">{v:.3g}</text>')
    out.append(f'<text x="{pad_l + pw / 2:.1f}" y="{height - 8}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text x="14" y="{pad_t + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {pad_t + ph / 2:.1f})">{escape(ylabel)}</text>')
    for k, (name, ps) in enumerate(pts.items()):
        color = PALETTE[k % len(PALETTE)]
        if ps:
            path = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in ps)
            out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
            out += [f'<circle cx="{sx(x):.1f}" cy="{sy(y):.1f}" r="2.5" fill="{color}"/>' for x, y in ps]
        out.append(f'<text x="{pad_l + 8}" y="{pad_t + 14 + 14 * k}" fill="{color}">{escape(name)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
