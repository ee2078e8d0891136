"""Sweep results as a plain SVG line chart (no external assets)."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

from .experiment import SweepRow

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#7f7f7f", "#9467bd", "#8c564b")
WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 60, 170, 20, 50


def _fmt(v: float) -> str:
    return f"{v:.2f}".rstrip("0").rstrip(".")


def render_svg(rows: Sequence[SweepRow], metric: str = "pct", k: int = 16) -> str:
    """One polyline per method. ``metric`` is ``pct`` (0..100) or ``colors`` (0..k)."""
    if metric not in ("pct", "colors"):
        raise ValueError("metric must be 'pct' or 'colors'")
    if not rows:
        raise ValueError("no rows to plot")
    methods: list[str] = []
    series: dict[str, list[tuple[float, float]]] = {}
    for r in rows:
        y = r.schedulable_pct if metric == "pct" else r.avg_colors_used
        if r.method not in series:
            methods.append(r.method)
            series[r.method] = []
        if y is not None:
            series[r.method].append((r.utilization, y))
    xs = [r.utilization for r in rows]
    x0, x1 = min(xs), max(xs)
    if x1 == x0:
        x1 = x0 + 1
    y_top = 100.0 if metric == "pct" else float(k)
    pw, ph = WIDTH - LEFT - RIGHT, HEIGHT - TOP - BOTTOM

    def sx(x):
        return LEFT + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return TOP + ph - min(y, y_top) / y_top * ph

    ylabel = "schedulable task sets (%)" if metric == "pct" else "average colors used"
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">',
           f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<line x1="{LEFT}" y1="{TOP + ph}" x2="{LEFT + pw}" y2="{TOP + ph}" stroke="black"/>',
           f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + ph}" stroke="black"/>']
    for k_tick in range(5):
        x = x0 + (x1 - x0) * k_tick / 4
        out.append(f'<text x="{sx(x):.1f}" y="{TOP + ph + 16}" text-anchor="middle">'
                   f'{_fmt(x)}</text>')
        y = y_top * k_tick / 4
        out.append(f'<text x="{LEFT - 6}" y="{sy(y) + 4:.1f}" text-anchor="end">{_fmt(y)}</text>')
    out.append(f'<text x="{LEFT + pw / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle">'
               'utilization</text>')
    out.append(f'<text x="14" y="{TOP + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 14 {TOP + ph / 2:.1f})">{ylabel}</text>')
    for n, m in enumerate(methods):
        color = PALETTE[n % len(PALETTE)]
        pts = " ".join(f"{sx(x):.1f},{sy(y):.1f}" for x, y in series[m])
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" '
                   f'data-method="{escape(m)}" points="{pts}"/>')
        ly = TOP + 14 + 18 * n
        out.append(f'<line x1="{WIDTH - RIGHT + 15}" y1="{ly - 4}" x2="{WIDTH - RIGHT + 40}" '
                   f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{WIDTH - RIGHT + 46}" y="{ly}">{escape(m)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
