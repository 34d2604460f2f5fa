"""Minimal static SVG output (heatmaps and scatter plots), no plotting dependency.

Figures use a fixed ``600 x 480`` viewBox.  Colors come from an 8-stop
viridis-like ramp, linearly interpolated in RGB::

    #440154 #46327e #365c8d #277f8e #1fa187 #4ac16d #a0da39 #fde725
"""
from __future__ import annotations

from typing import Optional, Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 600, 480
RAMP = ("#440154", "#46327e", "#365c8d", "#277f8e", "#1fa187", "#4ac16d", "#a0da39", "#fde725")


def ramp_color(t: float) -> str:
    """Color for ``t`` in [0, 1]; NaN maps to light grey."""
    if not np.isfinite(t):
        return "#dddddd"
    t = min(max(float(t), 0.0), 1.0) * (len(RAMP) - 1)
    i = min(int(t), len(RAMP) - 2)
    f = t - i
    a = [int(RAMP[i][k : k + 2], 16) for k in (1, 3, 5)]
    b = [int(RAMP[i + 1][k : k + 2], 16) for k in (1, 3, 5)]
    return "#" + "".join(f"{round(x + f * (y - x)):02x}" for x, y in zip(a, b))


def _header(title: str, comment: Optional[str]) -> list:
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" width="{WIDTH}" height="{HEIGHT}">',
    ]
    if comment:
        out.append(f"<!-- {escape(comment)} -->")
    out.append('<rect width="100%" height="100%" fill="white"/>')
    out.append(f'<text x="{WIDTH / 2}" y="24" text-anchor="middle" font-size="16">{escape(title)}</text>')
    return out


def _fmt(v) -> str:
    return f"{v:g}" if isinstance(v, (int, float, np.floating, np.integer)) else str(v)


def heatmap(
    values: np.ndarray,
    row_labels: Sequence,
    col_labels: Sequence,
    title: str,
    xlabel: str,
    ylabel: str,
    vmin: float = 0.0,
    vmax: float = 1.0,
    comment: Optional[str] = None,
) -> str:
    """Grid of colored cells; ``values[i, j]`` is drawn at row ``i`` (bottom to top), column ``j``."""
    values = np.asarray(values, dtype=float)
    nr, nc = values.shape
    x0, y0, x1, y1 = 80, 50, 500, 420
    cw, ch = (x1 - x0) / nc, (y1 - y0) / nr
    out = _header(title, comment)
    span = vmax - vmin if vmax > vmin else 1.0
    for i in range(nr):
        for j in range(nc):
            v = values[i, j]
            y = y1 - (i + 1) * ch
            out.append(
                f'<rect x="{x0 + j * cw:.2f}" y="{y:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                f'fill="{ramp_color((v - vmin) / span)}"><title>{_fmt(v)}</title></rect>'
            )
    for j, lab in enumerate(col_labels):
        out.append(f'<text x="{x0 + (j + 0.5) * cw:.2f}" y="{y1 + 18}" text-anchor="middle" font-size="11">{escape(_fmt(lab))}</text>')
    for i, lab in enumerate(row_labels):
        out.append(f'<text x="{x0 - 6}" y="{y1 - (i + 0.5) * ch + 4:.2f}" text-anchor="end" font-size="11">{escape(_fmt(lab))}</text>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 20}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>')
    out.append(
        f'<text x="20" y="{(y0 + y1) / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 20 {(y0 + y1) / 2})">{escape(ylabel)}</text>'
    )
    # color bar
    for k in range(32):
        t = k / 31
        out.append(
            f'<rect x="530" y="{y1 - (k + 1) * (y1 - y0) / 32:.2f}" width="20" height="{(y1 - y0) / 32 + 0.5:.2f}" fill="{ramp_color(t)}"/>'
        )
    out.append(f'<text x="556" y="{y1}" font-size="11">{_fmt(vmin)}</text>')
    out.append(f'<text x="556" y="{y0 + 8}" font-size="11">{_fmt(vmax)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def scatter(
    x: np.ndarray,
    y: np.ndarray,
    title: str,
    xlabel: str,
    ylabel: str,
    comment: Optional[str] = None,
) -> str:
    """Scatter plot with linear axes fitted to the data range."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    x0, y0, x1, y1 = 80, 50, 560, 420
    out = _header(title, comment)
    out.append(f'<rect x="{x0}" y="{y0}" width="{x1 - x0}" height="{y1 - y0}" fill="none" stroke="black"/>')
    ok = np.isfinite(x) & np.isfinite(y)
    if ok.any():
        lo_x, hi_x = float(x[ok].min()), float(x[ok].max())
        lo_y, hi_y = float(y[ok].min()), float(y[ok].max())
        sx = (x1 - x0) / (hi_x - lo_x if hi_x > lo_x else 1.0)
        sy = (y1 - y0) / (hi_y - lo_y if hi_y > lo_y else 1.0)
        for xi, yi in zip(x[ok], y[ok]):
            out.append(
                f'<circle cx="{x0 + (xi - lo_x) * sx:.2f}" cy="{y1 - (yi - lo_y) * sy:.2f}" r="2" fill="{RAMP[2]}" fill-opacity="0.6"/>'
            )
        if lo_y < 0 < hi_y:
            yz = y1 - (0 - lo_y) * sy
            out.append(f'<line x1="{x0}" y1="{yz:.2f}" x2="{x1}" y2="{yz:.2f}" stroke="grey" stroke-dasharray="4 3"/>')
        out.append(f'<text x="{x0}" y="{y1 + 16}" font-size="11">{lo_x:.3g}</text>')
        out.append(f'<text x="{x1}" y="{y1 + 16}" text-anchor="end" font-size="11">{hi_x:.3g}</text>')
        out.append(f'<text x="{x0 - 4}" y="{y1}" text-anchor="end" font-size="11">{lo_y:.3g}</text>')
        out.append(f'<text x="{x0 - 4}" y="{y0 + 8}" text-anchor="end" font-size="11">{hi_y:.3g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2}" y="{HEIGHT - 20}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>')
    out.append(
        f'<text x="20" y="{(y0 + y1) / 2}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 20 {(y0 + y1) / 2})">{escape(ylabel)}</text>'
    )
    out.append("</svg>")
    return "\n".join(out) + "\n"
