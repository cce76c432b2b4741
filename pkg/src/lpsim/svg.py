"""Tiny dependency-free SVG emitters for line plots and heatmaps."""

from __future__ import annotations

import math
from html import escape
from typing import Mapping, Sequence

_COLORS = ("#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")
W, H, PAD = 640, 420, 60


def _scale(lo: float, hi: float, a: float, b: float):
    span = (hi - lo) or 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _finite(vals):
    return [v for v in vals if v is not None and math.isfinite(v)]


def line_plot(
    series: Mapping[str, tuple[Sequence[float], Sequence[float]]],
    title: str = "",
    xlabel: str = "",
    ylabel: str = "",
    logy: bool = False,
) -> str:
    xs = _finite([x for xv, _ in series.values() for x in xv])
    ys = [y for _, yv in series.values() for y in yv]
    if logy:
        ys = [math.log10(y) for y in _finite(ys) if y > 0]
    ys = _finite(ys)
    if not xs or not ys:
        return _frame(title, xlabel, ylabel, "")
    fx = _scale(min(xs), max(xs), PAD, W - PAD)
    fy = _scale(min(ys), max(ys), H - PAD, PAD)
    body = []
    for i, (name, (xv, yv)) in enumerate(series.items()):
        pts = []
        for x, y in zip(xv, yv):
            if y is None or not math.isfinite(y) or (logy and y <= 0):
                continue
            pts.append(f"{fx(x):.1f},{fy(math.log10(y) if logy else y):.1f}")
        c = _COLORS[i % len(_COLORS)]
        body.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{" ".join(pts)}"/>')
        body.append(f'<text x="{W - PAD + 5}" y="{PAD + 15 * i}" font-size="11" fill="{c}">{escape(name)}</text>')
    ticks = (
        f'<text x="{PAD}" y="{H - PAD + 15}" font-size="10">{min(xs):.4g}</text>'
        f'<text x="{W - PAD}" y="{H - PAD + 15}" font-size="10" text-anchor="end">{max(xs):.4g}</text>'
        f'<text x="{PAD - 5}" y="{H - PAD}" font-size="10" text-anchor="end">{_ylab(min(ys), logy)}</text>'
        f'<text x="{PAD - 5}" y="{PAD + 4}" font-size="10" text-anchor="end">{_ylab(max(ys), logy)}</text>'
    )
    return _frame(title, xlabel, ylabel, "".join(body) + ticks)


def _ylab(v: float, logy: bool) -> str:
    return f"1e{v:.1f}" if logy else f"{v:.4g}"


def heatmap(grid: Sequence[Sequence[float]], xs: Sequence[float], ys: Sequence[float], title: str = "",
            xlabel: str = "", ylabel: str = "") -> str:
    """Diverging red/blue map centred on zero; ``grid[i][j]`` sits at ``(xs[j], ys[i])``."""
    vals = _finite([v for row in grid for v in row])
    amp = max((abs(v) for v in vals), default=1.0) or 1.0
    cw = (W - 2 * PAD) / max(len(xs), 1)
    ch = (H - 2 * PAD) / max(len(ys), 1)
    body = []
    for i, row in enumerate(grid):
        for j, v in enumerate(row):
            t = 0.0 if not math.isfinite(v) else max(-1.0, min(1.0, v / amp))
            # negative -> red, positive -> blue
            r, b = (255, int(255 * (1 + t))) if t < 0 else (int(255 * (1 - t)), 255)
            col = f"rgb({r},{int(255 * (1 - abs(t)))},{b})"
            body.append(
                f'<rect x="{PAD + j * cw:.1f}" y="{H - PAD - (i + 1) * ch:.1f}" width="{cw:.1f}" height="{ch:.1f}" fill="{col}"/>'
            )
    return _frame(title, xlabel, ylabel, "".join(body))


def _frame(title: str, xlabel: str, ylabel: str, inner: str) -> str:
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif">'
        f'<rect width="100%" height="100%" fill="white"/>'
        f'<text x="{W / 2}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>'
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD}" y2="{H - PAD}" stroke="black"/>'
        f'<line x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>'
        f'<text x="{W / 2}" y="{H - 15}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>'
        f'<text x="15" y="{H / 2}" text-anchor="middle" font-size="12" transform="rotate(-90 15 {H / 2})">{escape(ylabel)}</text>'
        f"{inner}</svg>"
    )
