"""Standalone SVG figures for map grids, bar charts and dot plots.

Documents are built as plain text so output is byte-for-byte reproducible.
Low values are dark and high values light, on every colormap.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape

import numpy as np

# (position, (r, g, b)) stops; every map rises monotonically in luminance
COLORMAPS = {
    "gray": ((0.0, (0, 0, 0)), (1.0, (255, 255, 255))),
    "heat": ((0.0, (0, 0, 0)), (0.4, (190, 30, 0)), (0.75, (255, 200, 0)), (1.0, (255, 255, 255))),
}

_TITLE_H = 28
_FONT = "font-family=\"sans-serif\""


@dataclass
class RenderSpec:
    width: int = 480
    height: int = 480
    colormap: str = "gray"
    show_labels: bool = True
    title: str = ""

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("figure dimensions must be positive")
        if self.colormap not in COLORMAPS:
            raise ValueError(f"unknown colormap {self.colormap!r}; choose from {sorted(COLORMAPS)}")


def color_for(value: float, colormap: str = "gray") -> str:
    """Hex fill for ``value`` in [0, 1]."""
    v = min(1.0, max(0.0, float(value)))
    stops = COLORMAPS[colormap]
    for (p0, c0), (p1, c1) in zip(stops, stops[1:]):
        if v <= p1:
            t = 0.0 if p1 == p0 else (v - p0) / (p1 - p0)
            rgb = [round(a + (b - a) * t) for a, b in zip(c0, c1)]
            return "#{:02x}{:02x}{:02x}".format(*rgb)
    return "#{:02x}{:02x}{:02x}".format(*stops[-1][1])


def luminance(hex_color: str) -> float:
    r, g, b = (int(hex_color[i:i + 2], 16) for i in (1, 3, 5))
    return 0.2126 * r + 0.7152 * g + 0.0722 * b


def _num(x: float) -> str:
    return f"{x:.2f}"


def _header(width, height, title):
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
    ]
    if title:
        out.append(f'<text class="title" x="{_num(width / 2)}" y="18" text-anchor="middle" '
                   f'{_FONT} font-size="14">{escape(title)}</text>')
    return out


def render_grid(grid, spec: RenderSpec | None = None, overlay=None, labels=None) -> str:
    """One filled square per unit, with optional starburst lines and label digits.

    Args:
        grid: ``(rows, cols)`` finite values, min-max scaled for colouring
            (a constant grid renders mid-gray).
        overlay: a :class:`~somids.explain.StarburstOverlay`; each segment
            becomes one ``line`` between unit centres.
        labels: per-unit labels drawn as text when ``spec.show_labels``.
    """
    spec = spec or RenderSpec()
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 2 or grid.size == 0:
        raise ValueError("grid must be a non-empty 2-d array")
    if not np.all(np.isfinite(grid)):
        raise ValueError("grid contains non-finite values")
    rows, cols = grid.shape
    top = _TITLE_H if spec.title else 0
    cell = min(spec.width / cols, (spec.height - top) / rows)
    if cell <= 0:
        raise ValueError("figure too small for the grid")
    lo, hi = grid.min(), grid.max()
    scaled = np.full(grid.shape, 0.5) if hi == lo else (grid - lo) / (hi - lo)

    out = _header(spec.width, spec.height, spec.title)
    out.append('<g class="cells" stroke="none">')
    for r in range(rows):
        for c in range(cols):
            out.append(
                f'<rect class="cell" x="{_num(c * cell)}" y="{_num(top + r * cell)}" '
                f'width="{_num(cell)}" height="{_num(cell)}" '
                f'fill="{color_for(scaled[r, c], spec.colormap)}"/>'
            )
    out.append("</g>")

    def centre(u):
        r, c = divmod(int(u), cols)
        return (c + 0.5) * cell, top + (r + 0.5) * cell

    if overlay is not None:
        out.append('<g class="starburst" stroke="#d62728" stroke-width="1.5">')
        for a, b in overlay.segments:
            (x1, y1), (x2, y2) = centre(a), centre(b)
            out.append(f'<line class="segment" x1="{_num(x1)}" y1="{_num(y1)}" x2="{_num(x2)}" y2="{_num(y2)}"/>')
        out.append("</g>")

    if labels is not None and spec.show_labels:
        labels = np.asarray(labels).ravel()
        if labels.size != rows * cols:
            raise ValueError(f"{labels.size} labels for {rows * cols} units")
        out.append(f'<g class="labels" {_FONT} font-size="{_num(cell * 0.45)}" '
                   'text-anchor="middle" dominant-baseline="central">')
        for u, lab in enumerate(labels):
            x, y = centre(u)
            fill = "#000000" if scaled.ravel()[u] > 0.5 else "#ffffff"
            text = "" if lab is None or int(lab) < 0 else str(int(lab))
            out.append(f'<text class="label" x="{_num(x)}" y="{_num(y)}" fill="{fill}">'
                       f"{escape(text)}</text>")
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def render_bars(values, spec: RenderSpec | None = None, marker: str = "bar") -> str:
    """Horizontal chart with one bar (or dot) per ``(name, value)`` entry.

    Entries are drawn top to bottom in the given order. Lengths are
    proportional to the value on a scale whose full width is
    ``max(1, largest value)``.
    """
    if marker not in ("bar", "dot"):
        raise ValueError("marker must be 'bar' or 'dot'")
    values = [(str(name), float(v)) for name, v in values]
    if not values:
        raise ValueError("nothing to render")
    if not all(np.isfinite(v) for _, v in values):
        raise ValueError("values contain non-finite entries")
    spec = spec or RenderSpec(height=max(120, 28 * len(values) + 60))
    top = _TITLE_H if spec.title else 8
    label_w = min(spec.width * 0.45, 8 + 7 * max(len(n) for n, _ in values))
    plot_w = spec.width - label_w - 16
    row_h = (spec.height - top - 24) / len(values)
    if plot_w <= 0 or row_h <= 0:
        raise ValueError("figure too small for the chart")
    full = max(1.0, max(v for _, v in values))

    out = _header(spec.width, spec.height, spec.title)
    out.append(f'<line class="axis" x1="{_num(label_w)}" y1="{_num(top)}" x2="{_num(label_w)}" '
               f'y2="{_num(top + row_h * len(values))}" stroke="#000000"/>')
    for i, (name, v) in enumerate(values):
        y = top + i * row_h
        length = plot_w * max(0.0, v) / full
        out.append(f'<text class="name" x="{_num(label_w - 6)}" y="{_num(y + row_h / 2)}" '
                   f'text-anchor="end" dominant-baseline="central" {_FONT} font-size="11">'
                   f"{escape(name)}</text>")
        if marker == "bar":
            out.append(f'<rect class="bar" x="{_num(label_w)}" y="{_num(y + row_h * 0.15)}" '
                       f'width="{_num(length)}" height="{_num(row_h * 0.7)}" fill="#4c72b0"/>')
        else:
            out.append(f'<circle class="dot" cx="{_num(label_w + length)}" '
                       f'cy="{_num(y + row_h / 2)}" r="{_num(min(5.0, row_h / 3))}" fill="#4c72b0"/>')
    axis_y = top + row_h * len(values) + 14
    out.append(f'<text class="tick" x="{_num(label_w)}" y="{_num(axis_y)}" {_FONT} '
               'font-size="10" text-anchor="middle">0</text>')
    out.append(f'<text class="tick" x="{_num(label_w + plot_w)}" y="{_num(axis_y)}" {_FONT} '
               f'font-size="10" text-anchor="middle">{full:g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
