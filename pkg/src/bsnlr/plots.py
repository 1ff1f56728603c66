"""Static SVG index plots."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 400
LEFT, RIGHT, TOP, BOTTOM = 70, 20, 40, 50


def _fmt(x: float) -> str:
    return f"{x:.2f}"


def index_plot(values, title: str, ylabel: str, hline: float | None = None,
               hline_label: str | None = None) -> str:
    """One point per observation against its 1-based index."""
    values = np.asarray(values, dtype=float)
    n = values.size
    lo = min(0.0, float(values.min())) if n else 0.0
    hi = max(float(values.max()) if n else 1.0, hline if hline is not None else -np.inf)
    if hi <= lo:
        hi = lo + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - (pad if lo < 0 else 0.0), hi + pad
    plot_w = WIDTH - LEFT - RIGHT
    plot_h = HEIGHT - TOP - BOTTOM

    def sx(i):
        return LEFT + (plot_w * (i - 0.5) / n if n else 0.0)

    def sy(v):
        return TOP + plot_h * (hi - v) / (hi - lo)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<title>{escape(title)}</title>',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-family="sans-serif" '
        f'font-size="15">{escape(title)}</text>',
        f'<line x1="{LEFT}" y1="{TOP + plot_h}" x2="{LEFT + plot_w}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{TOP + plot_h}" stroke="black"/>',
        f'<text x="{LEFT + plot_w / 2}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">Index</text>',
        f'<text x="16" y="{TOP + plot_h / 2}" text-anchor="middle" font-family="sans-serif" '
        f'font-size="12" transform="rotate(-90 16 {TOP + plot_h / 2})">{escape(ylabel)}</text>',
    ]
    for v in np.linspace(lo, hi, 5):
        out.append(
            f'<text x="{LEFT - 6}" y="{_fmt(sy(v) + 4)}" text-anchor="end" font-family="sans-serif" '
            f'font-size="10">{v:.3g}</text>'
        )
    if lo < 0 < hi:
        out.append(f'<line x1="{LEFT}" y1="{_fmt(sy(0))}" x2="{LEFT + plot_w}" y2="{_fmt(sy(0))}" '
                   f'stroke="#999" stroke-dasharray="2,3"/>')
    if hline is not None:
        out.append(f'<line x1="{LEFT}" y1="{_fmt(sy(hline))}" x2="{LEFT + plot_w}" '
                   f'y2="{_fmt(sy(hline))}" stroke="red" stroke-dasharray="6,4"/>')
        if hline_label:
            out.append(f'<text x="{LEFT + plot_w - 4}" y="{_fmt(sy(hline) - 5)}" text-anchor="end" '
                       f'font-family="sans-serif" font-size="10" fill="red">{escape(hline_label)}</text>')
    for i, v in enumerate(values, start=1):
        out.append(f'<circle cx="{_fmt(sx(i))}" cy="{_fmt(sy(v))}" r="3" fill="#1f5fa8"/>')
    for i in (1, n):
        if n:
            out.append(f'<text x="{_fmt(sx(i))}" y="{TOP + plot_h + 15}" text-anchor="middle" '
                       f'font-family="sans-serif" font-size="10">{i}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
