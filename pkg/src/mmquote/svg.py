"""Minimal standalone SVG 1.1 charts: line plots and heatmaps."""

from __future__ import annotations

from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=80, right=140, top=40, bottom=60)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _header(title: str) -> list:
    return [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        '<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
    ]


def _span(values) -> tuple:
    lo, hi = float(np.nanmin(values)), float(np.nanmax(values))
    if hi == lo:
        pad = abs(lo) * 0.05 or 1.0
        return lo - pad, hi + pad
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def _axes(xr, yr, xlabel, ylabel) -> list:
    x0, y0 = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    x1, y1 = WIDTH - MARGIN["right"], MARGIN["top"]
    out = [
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    for f in np.linspace(0.0, 1.0, 5):
        xv = xr[0] + f * (xr[1] - xr[0])
        yv = yr[0] + f * (yr[1] - yr[0])
        px = x0 + f * (x1 - x0)
        py = y0 - f * (y0 - y1)
        out.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" y2="{y0 + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.1f}" y="{y0 + 18}" text-anchor="middle">{_fmt(xv)}</text>')
        out.append(f'<line x1="{x0 - 5}" y1="{py:.1f}" x2="{x0}" y2="{py:.1f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{py + 4:.1f}" text-anchor="end">{_fmt(yv)}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="18" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>'
    )
    return out


def line_chart(series: Sequence, title: str, xlabel: str, ylabel: str) -> str:
    """``series`` is a list of ``(label, xs, ys)``; NaN values break the line."""
    xs_all = np.concatenate([np.asarray(s[1], dtype=float) for s in series])
    ys_all = np.concatenate([np.asarray(s[2], dtype=float) for s in series])
    finite = np.isfinite(ys_all)
    xr = _span(xs_all)
    yr = _span(ys_all[finite]) if finite.any() else (0.0, 1.0)
    x0, y0 = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    x1, y1 = WIDTH - MARGIN["right"], MARGIN["top"]

    def px(x):
        return x0 + (x - xr[0]) / (xr[1] - xr[0]) * (x1 - x0)

    def py(y):
        return y0 - (y - yr[0]) / (yr[1] - yr[0]) * (y0 - y1)

    out = _header(title) + _axes(xr, yr, xlabel, ylabel)
    for n, (label, xs, ys) in enumerate(series):
        color = PALETTE[n % len(PALETTE)]
        segment = []
        for x, y in zip(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float)):
            if np.isfinite(y):
                segment.append(f"{px(x):.2f},{py(y):.2f}")
                continue
            if len(segment) > 1:
                out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{" ".join(segment)}"/>')
            segment = []
        if len(segment) > 1:
            out.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.8" points="{" ".join(segment)}"/>')
        elif len(segment) == 1:
            cx, cy = segment[0].split(",")
            out.append(f'<circle cx="{cx}" cy="{cy}" r="2.5" fill="{color}"/>')
        ly = MARGIN["top"] + 16 * n + 10
        out.append(f'<line x1="{x1 + 12}" y1="{ly}" x2="{x1 + 32}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{x1 + 36}" y="{ly + 4}">{escape(str(label))}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _color(f: float) -> str:
    # blue -> white -> red
    f = min(max(f, 0.0), 1.0)
    if f < 0.5:
        g = int(255 * f * 2)
        return f"#{g:02x}{g:02x}ff"
    g = int(255 * (1.0 - f) * 2)
    return f"#ff{g:02x}{g:02x}"


def heatmap(values: np.ndarray, xs: Sequence, ys: Sequence, title: str, xlabel: str, ylabel: str) -> str:
    """Cell ``values[i, j]`` sits at ``(xs[i], ys[j])``; NaN cells are grey."""
    values = np.asarray(values, dtype=float)
    nx, ny = values.shape
    x0, y0 = MARGIN["left"], HEIGHT - MARGIN["bottom"]
    x1, y1 = WIDTH - MARGIN["right"], MARGIN["top"]
    cw, ch = (x1 - x0) / nx, (y0 - y1) / ny
    finite = values[np.isfinite(values)]
    lo, hi = (float(finite.min()), float(finite.max())) if finite.size else (0.0, 1.0)
    rng = hi - lo or 1.0
    out = _header(title)
    for i in range(nx):
        for j in range(ny):
            v = values[i, j]
            fill = "#bbbbbb" if not np.isfinite(v) else _color((v - lo) / rng)
            out.append(
                f'<rect x="{x0 + i * cw:.2f}" y="{y0 - (j + 1) * ch:.2f}" width="{cw:.2f}" height="{ch:.2f}" '
                f'fill="{fill}"><title>{_fmt(xs[i])}, {_fmt(ys[j])}: {_fmt(v)}</title></rect>'
            )
    for i in range(nx):
        out.append(f'<text x="{x0 + (i + 0.5) * cw:.1f}" y="{y0 + 18}" text-anchor="middle">{_fmt(xs[i])}</text>')
    for j in range(ny):
        out.append(f'<text x="{x0 - 8}" y="{y0 - (j + 0.5) * ch + 4:.1f}" text-anchor="end">{_fmt(ys[j])}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(
        f'<text x="18" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 18 {(y0 + y1) / 2:.1f})">{escape(ylabel)}</text>'
    )
    for n, f in enumerate(np.linspace(1.0, 0.0, 6)):
        yy = y1 + n * (y0 - y1) / 6
        out.append(f'<rect x="{x1 + 15}" y="{yy:.1f}" width="18" height="{(y0 - y1) / 6:.1f}" fill="{_color(f)}"/>')
        out.append(f'<text x="{x1 + 38}" y="{yy + 12:.1f}">{_fmt(lo + f * rng)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def write(path, document: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(document)
