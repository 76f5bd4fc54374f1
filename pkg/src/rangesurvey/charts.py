"""Minimal SVG line charts of MAP curves with one-std shaded bands.

The renderer is deliberately hand-rolled: output depends only on the
aggregate values and the strategy order, so regenerating a chart from the
same inputs is byte-identical.
"""

from __future__ import annotations

import logging

log = logging.getLogger(__name__)

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b",
    "#e377c2", "#7f7f7f", "#bcbd22", "#17becf", "#393b79", "#ad494a",
    "#637939", "#7b4173",
)

_WIDTH, _HEIGHT = 720.0, 440.0
_LEFT, _RIGHT, _TOP, _BOTTOM = 56.0, 168.0, 28.0, 44.0


def _fmt(v):
    return f"{v:.2f}"


def render_map_chart(aggregates, title="MAP by timestep"):
    """Render ``{strategy: AggregateCurve}`` to an SVG document string."""
    if not aggregates:
        raise ValueError("nothing to render")
    n_t = max(curve.n_timesteps for curve in aggregates.values())
    plot_w = _WIDTH - _LEFT - _RIGHT
    plot_h = _HEIGHT - _TOP - _BOTTOM

    def sx(t):
        return _LEFT + (plot_w * t / max(n_t - 1, 1))

    def sy(v):
        return _TOP + plot_h * (1.0 - min(max(v, 0.0), 1.0))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH:.0f}" '
        f'height="{_HEIGHT:.0f}" viewBox="0 0 {_WIDTH:.0f} {_HEIGHT:.0f}">',
        f'<rect width="{_WIDTH:.0f}" height="{_HEIGHT:.0f}" fill="white"/>',
        f'<text x="{_LEFT + plot_w / 2:.1f}" y="18" font-family="sans-serif" '
        f'font-size="14" text-anchor="middle">{title}</text>',
    ]
    # Axes and gridlines.
    for i in range(6):
        v = i / 5.0
        y = sy(v)
        parts.append(f'<line x1="{_fmt(_LEFT)}" y1="{_fmt(y)}" '
                     f'x2="{_fmt(_LEFT + plot_w)}" y2="{_fmt(y)}" '
                     f'stroke="#dddddd" stroke-width="1"/>')
        parts.append(f'<text x="{_fmt(_LEFT - 8)}" y="{_fmt(y + 4)}" '
                     f'font-family="sans-serif" font-size="11" '
                     f'text-anchor="end">{v:.1f}</text>')
    x_step = max(1, (n_t - 1) // 6 or 1)
    for t in range(0, n_t, x_step):
        x = sx(t)
        parts.append(f'<line x1="{_fmt(x)}" y1="{_fmt(_TOP + plot_h)}" '
                     f'x2="{_fmt(x)}" y2="{_fmt(_TOP + plot_h + 4)}" '
                     f'stroke="#333333" stroke-width="1"/>')
        parts.append(f'<text x="{_fmt(x)}" y="{_fmt(_TOP + plot_h + 18)}" '
                     f'font-family="sans-serif" font-size="11" '
                     f'text-anchor="middle">{t}</text>')
    parts.append(f'<rect x="{_fmt(_LEFT)}" y="{_fmt(_TOP)}" width="{_fmt(plot_w)}" '
                 f'height="{_fmt(plot_h)}" fill="none" stroke="#333333" '
                 f'stroke-width="1"/>')
    parts.append(f'<text x="{_fmt(_LEFT + plot_w / 2)}" y="{_fmt(_HEIGHT - 8)}" '
                 f'font-family="sans-serif" font-size="12" '
                 f'text-anchor="middle">timestep</text>')

    for i, (name, curve) in enumerate(aggregates.items()):
        color = PALETTE[i % len(PALETTE)]
        ts = range(curve.n_timesteps)
        upper = [(sx(t), sy(curve.map_mean[t] + curve.map_std[t])) for t in ts]
        lower = [(sx(t), sy(curve.map_mean[t] - curve.map_std[t])) for t in ts]
        band = upper + lower[::-1]
        band_pts = " ".join(f"{_fmt(x)},{_fmt(y)}" for x, y in band)
        parts.append(f'<polygon points="{band_pts}" fill="{color}" '
                     f'fill-opacity="0.15" stroke="none"/>')
        line_pts = " ".join(f"{_fmt(sx(t))},{_fmt(sy(curve.map_mean[t]))}" for t in ts)
        parts.append(f'<polyline points="{line_pts}" fill="none" stroke="{color}" '
                     f'stroke-width="2"/>')
        ly = _TOP + 14 + 18 * i
        lx = _LEFT + plot_w + 14
        parts.append(f'<line x1="{_fmt(lx)}" y1="{_fmt(ly - 4)}" x2="{_fmt(lx + 22)}" '
                     f'y2="{_fmt(ly - 4)}" stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{_fmt(lx + 28)}" y="{_fmt(ly)}" '
                     f'font-family="sans-serif" font-size="12">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def emit_charts(aggregates, path, title="MAP by timestep"):
    """Write the MAP chart for an experiment; warn and skip if empty."""
    if not aggregates:
        log.warning("no aggregate curves; skipping chart %s", path)
        return False
    svg = render_map_chart(aggregates, title=title)
    with open(path, "w", newline="") as fh:
        fh.write(svg)
    return True
