"""Minimal log-linear line plot writer."""
from __future__ import annotations

import numpy as np


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def log_plot(path, series: dict, title: str = "", width: int = 480, height: int = 320) -> None:
    """Write an SVG with one polyline per series on a ``log10`` y axis.

    ``series`` maps a label to ``(x, y)``; non-positive ``y`` values are dropped.
    """
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]
    pad = 40
    pts = {}
    for label, (x, y) in series.items():
        x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
        ok = np.isfinite(y) & (y > 0)
        if ok.any():
            pts[label] = (x[ok], np.log10(y[ok]))
    lines = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<text x="{pad}" y="20" font-size="12">{title}</text>']
    if pts:
        xs = np.concatenate([p[0] for p in pts.values()])
        ys = np.concatenate([p[1] for p in pts.values()])
        x0, x1 = xs.min(), max(xs.max(), xs.min() + 1)
        y0, y1 = np.floor(ys.min()), np.ceil(max(ys.max(), ys.min() + 1))

        def sx(v):
            return pad + (v - x0) / (x1 - x0) * (width - 2 * pad)

        def sy(v):
            return height - pad - (v - y0) / (y1 - y0) * (height - 2 * pad)

        lines.append(f'<rect x="{pad}" y="{pad}" width="{width - 2 * pad}" height="{height - 2 * pad}" '
                     'fill="none" stroke="#888"/>')
        for e in range(int(y0), int(y1) + 1):
            lines.append(f'<text x="2" y="{_fmt(sy(e) + 4)}" font-size="10">1e{e}</text>')
        for i, (label, (x, y)) in enumerate(pts.items()):
            c = colors[i % len(colors)]
            coords = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(x, y))
            lines.append(f'<polyline points="{coords}" fill="none" stroke="{c}"/>')
            lines.append(f'<text x="{width - pad - 110}" y="{pad + 14 * (i + 1)}" font-size="10" '
                         f'fill="{c}">{label}</text>')
    lines.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")
