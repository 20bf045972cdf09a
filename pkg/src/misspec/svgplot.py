"""Minimal deterministic SVG plots.

Hand-rolled rather than delegated to a plotting library so that rerunning a
command byte-reproduces its artifacts (no embedded ids, timestamps or
library-version noise).  Coordinates are formatted with fixed precision.

Conventions follow the scatter figures this package mirrors: ID metric on
the x-axis, OOD metric on the y-axis, one style per point series, selected
points drawn as larger stroked circles.
"""

from __future__ import annotations

from dataclasses import dataclass

__all__ = ["ScatterSeries", "scatter_svg", "line_svg", "panel_strip_svg"]


@dataclass(frozen=True)
class ScatterSeries:
    label: str
    points: tuple          # ((x, y), ...)
    color: str = "#d62728"
    radius: float = 3.0
    stroke: str = "none"
    stroke_width: float = 0.0


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _axis_range(values, lo=None, hi=None, pad_frac=0.05):
    values = list(values)
    vmin = min(values) if lo is None else lo
    vmax = max(values) if hi is None else hi
    if vmax <= vmin:
        vmax = vmin + 1.0
    pad = (vmax - vmin) * pad_frac
    return vmin - pad, vmax + pad


class _Canvas:
    def __init__(self, width, height, margin=(52, 16, 20, 40)):
        # margins: left, right, top, bottom
        self.width = width
        self.height = height
        self.ml, self.mr, self.mt, self.mb = margin
        self.parts: list[str] = []

    def x(self, v, lo, hi):
        return self.ml + (v - lo) / (hi - lo) * (self.width - self.ml - self.mr)

    def y(self, v, lo, hi):
        return self.height - self.mb - (v - lo) / (hi - lo) * (
            self.height - self.mt - self.mb
        )

    def add(self, s: str):
        self.parts.append(s)

    def axes(self, xlo, xhi, ylo, yhi, xlabel, ylabel, ticks=5):
        x0, x1 = self.ml, self.width - self.mr
        y0, y1 = self.height - self.mb, self.mt
        self.add(
            f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x1)}" y2="{_fmt(y0)}" '
            'stroke="black" stroke-width="1"/>'
        )
        self.add(
            f'<line x1="{_fmt(x0)}" y1="{_fmt(y0)}" x2="{_fmt(x0)}" y2="{_fmt(y1)}" '
            'stroke="black" stroke-width="1"/>'
        )
        for k in range(ticks):
            fx = xlo + (xhi - xlo) * k / (ticks - 1)
            px = self.x(fx, xlo, xhi)
            self.add(
                f'<line x1="{_fmt(px)}" y1="{_fmt(y0)}" x2="{_fmt(px)}" y2="{_fmt(y0 + 4)}" '
                'stroke="black" stroke-width="1"/>'
            )
            self.add(
                f'<text x="{_fmt(px)}" y="{_fmt(y0 + 16)}" font-size="10" '
                f'text-anchor="middle">{fx:.3g}</text>'
            )
            fy = ylo + (yhi - ylo) * k / (ticks - 1)
            py = self.y(fy, ylo, yhi)
            self.add(
                f'<line x1="{_fmt(x0 - 4)}" y1="{_fmt(py)}" x2="{_fmt(x0)}" y2="{_fmt(py)}" '
                'stroke="black" stroke-width="1"/>'
            )
            self.add(
                f'<text x="{_fmt(x0 - 7)}" y="{_fmt(py + 3)}" font-size="10" '
                f'text-anchor="end">{fy:.3g}</text>'
            )
        self.add(
            f'<text x="{_fmt((x0 + x1) / 2)}" y="{_fmt(self.height - 6)}" font-size="11" '
            f'text-anchor="middle">{xlabel}</text>'
        )
        self.add(
            f'<text x="12" y="{_fmt((y0 + y1) / 2)}" font-size="11" text-anchor="middle" '
            f'transform="rotate(-90 12 {_fmt((y0 + y1) / 2)})">{ylabel}</text>'
        )

    def render(self, title: str | None = None) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
            f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">'
        )
        body = []
        if title:
            body.append(
                f'<text x="{_fmt(self.width / 2)}" y="13" font-size="12" '
                f'text-anchor="middle">{title}</text>'
            )
        return head + "".join(body + self.parts) + "</svg>"


def scatter_svg(
    series,
    xlabel: str = "ID accuracy",
    ylabel: str = "OOD accuracy",
    title: str | None = None,
    width: int = 480,
    height: int = 360,
    x_range=None,
    y_range=None,
) -> str:
    """Scatter plot of one or more ScatterSeries with a legend."""
    series = [s for s in series if s.points]
    xs = [p[0] for s in series for p in s.points] or [0.0, 1.0]
    ys = [p[1] for s in series for p in s.points] or [0.0, 1.0]
    xlo, xhi = _axis_range(xs, *(x_range or (None, None)))
    ylo, yhi = _axis_range(ys, *(y_range or (None, None)))
    c = _Canvas(width, height)
    c.axes(xlo, xhi, ylo, yhi, xlabel, ylabel)
    for s in series:
        for x, y in s.points:
            attrs = f'cx="{_fmt(c.x(x, xlo, xhi))}" cy="{_fmt(c.y(y, ylo, yhi))}" r="{s.radius}" fill="{s.color}"'
            if s.stroke != "none":
                attrs += f' stroke="{s.stroke}" stroke-width="{s.stroke_width}"'
            c.add(f"<circle {attrs}/>")
    for k, s in enumerate(series):
        ly = c.mt + 12 + 14 * k
        lx = width - c.mr - 110
        c.add(f'<circle cx="{_fmt(lx)}" cy="{_fmt(ly - 3)}" r="4" fill="{s.color}"/>')
        c.add(f'<text x="{_fmt(lx + 8)}" y="{_fmt(ly)}" font-size="10">{s.label}</text>')
    return c.render(title)


def line_svg(
    x,
    curves,
    xlabel: str,
    ylabel: str,
    title: str | None = None,
    width: int = 480,
    height: int = 360,
    colors=("#1f77b4", "#d62728", "#2ca02c", "#9467bd"),
) -> str:
    """Line plot: `curves` is a list of (label, y-values)."""
    x = list(x)
    ys = [v for _, yv in curves for v in yv]
    xlo, xhi = _axis_range(x)
    ylo, yhi = _axis_range(ys)
    c = _Canvas(width, height)
    c.axes(xlo, xhi, ylo, yhi, xlabel, ylabel)
    for k, (label, yv) in enumerate(curves):
        color = colors[k % len(colors)]
        pts = " ".join(
            f"{_fmt(c.x(xv, xlo, xhi))},{_fmt(c.y(yval, ylo, yhi))}"
            for xv, yval in zip(x, yv)
        )
        c.add(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )
        for xv, yval in zip(x, yv):
            c.add(
                f'<circle cx="{_fmt(c.x(xv, xlo, xhi))}" cy="{_fmt(c.y(yval, ylo, yhi))}" '
                f'r="2.5" fill="{color}"/>'
            )
        ly = c.mt + 12 + 14 * k
        lx = width - c.mr - 110
        c.add(f'<rect x="{_fmt(lx - 4)}" y="{_fmt(ly - 7)}" width="8" height="3" fill="{color}"/>')
        c.add(f'<text x="{_fmt(lx + 8)}" y="{_fmt(ly)}" font-size="10">{label}</text>')
    return c.render(title)


def panel_strip_svg(
    panels,
    xlabel: str = "ID accuracy",
    ylabel: str = "OOD accuracy",
    panel_width: int = 260,
    panel_height: int = 260,
) -> str:
    """Horizontal strip of scatter panels; `panels` is a list of
    (title, series-list).  Each panel gets its own axes."""
    inner = []
    for k, (title, series) in enumerate(panels):
        svg = scatter_svg(
            series,
            xlabel=xlabel,
            ylabel=ylabel,
            title=title,
            width=panel_width,
            height=panel_height,
        )
        # strip the outer <svg> wrapper and translate into position
        body = svg[svg.index(">") + 1 : -len("</svg>")]
        inner.append(f'<g transform="translate({k * panel_width} 0)">{body}</g>')
    total_w = panel_width * max(len(panels), 1)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" '
        f'height="{panel_height}" viewBox="0 0 {total_w} {panel_height}">'
        + "".join(inner)
        + "</svg>"
    )
