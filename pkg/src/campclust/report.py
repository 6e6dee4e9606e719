"""Deterministic SVG charts with paired CSV data files."""

from __future__ import annotations

import csv
import hashlib
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

from .errors import SpecError

KINDS = ("histogram", "bar", "line", "scatter", "heatmap", "pairplot")
PALETTE = ("#1f3a93", "#c0392b", "#e6b800", "#27ae60", "#8e44ad", "#d35400", "#16a085", "#7f8c8d", "#2c3e50", "#e84393")
WIDTH, HEIGHT = 640, 480
MARGIN = (60, 30, 50, 70)  # top, right, bottom, left


def fmt(value: float) -> str:
    """Six significant digits, no negative zero."""
    text = format(float(value), ".6g")
    return "0" if text in ("-0", "0") else text


def histogram_bins(values, n_bins: int = 30) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width bins over [min, max]; the last bin includes its right edge.

    Identical values give one degenerate bin holding every point.
    """
    x = np.asarray(values, dtype=np.float64).ravel()
    if x.size == 0:
        raise SpecError("histogram of an empty vector")
    if not np.isfinite(x).all():
        raise SpecError("histogram values must be finite")
    if n_bins < 1:
        raise SpecError("n_bins must be positive")
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return np.array([lo, hi]), np.array([x.size], dtype=np.int64)
    edges = np.linspace(lo, hi, n_bins + 1)
    idx = np.clip(np.searchsorted(edges, x, side="right") - 1, 0, n_bins - 1)
    return edges, np.bincount(idx, minlength=n_bins).astype(np.int64)


def nice_ticks(lo: float, hi: float, target: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t / step) * step)
        t += step
    return ticks


@dataclass
class ChartSpec:
    kind: str
    title: str
    series: dict[str, np.ndarray]
    output_path: str | Path | None = None
    options: dict = field(default_factory=dict)

    def validate(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(f"unknown chart kind {self.kind!r}")
        if self.kind in ("line", "scatter", "pairplot", "bar"):
            lengths = {len(np.asarray(v)) for v in self.series.values()}
            if len(lengths) > 1:
                raise SpecError(f"{self.kind} series lengths differ: {sorted(lengths)}")
        if self.kind == "bar" and "categories" in self.options:
            n = len(self.options["categories"])
            if any(len(np.asarray(v)) != n for v in self.series.values()):
                raise SpecError("bar categories and heights differ in length")


class _Frame:
    """Maps data coordinates onto a plotting rectangle."""

    def __init__(self, x0, y0, w, h, xlim, ylim):
        self.x0, self.y0, self.w, self.h = x0, y0, w, h
        self.xlim = _pad(xlim)
        self.ylim = _pad(ylim)

    def x(self, v):
        lo, hi = self.xlim
        return self.x0 + (v - lo) / (hi - lo) * self.w

    def y(self, v):
        lo, hi = self.ylim
        return self.y0 + self.h - (v - lo) / (hi - lo) * self.h


def _pad(lim):
    lo, hi = float(lim[0]), float(lim[1])
    if hi == lo:
        return lo - 0.5, hi + 0.5
    return lo, hi


def _limits(values, include_zero=False, pad=0.05):
    v = np.asarray(values, dtype=np.float64)
    v = v[np.isfinite(v)]
    lo, hi = (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)
    if include_zero:
        lo, hi = min(lo, 0.0), max(hi, 0.0)
    span = hi - lo
    if span == 0:
        return lo - 0.5, hi + 0.5
    return lo - pad * span, hi + pad * span


class _Svg:
    def __init__(self, width=WIDTH, height=HEIGHT):
        self.width, self.height = width, height
        self.parts: list[str] = []

    def add(self, text: str) -> None:
        self.parts.append(text)

    def text(self, x, y, s, size=12, anchor="middle", rotate=None, weight=None):
        extra = f' transform="rotate({fmt(rotate)} {fmt(x)} {fmt(y)})"' if rotate is not None else ""
        bold = f' font-weight="{weight}"' if weight else ""
        self.add(
            f'<text x="{fmt(x)}" y="{fmt(y)}" font-size="{size}" text-anchor="{anchor}"{bold}{extra}>{escape(str(s))}</text>'
        )

    def line(self, x1, y1, x2, y2, stroke="#000", width=1.0, extra=""):
        self.add(
            f'<line x1="{fmt(x1)}" y1="{fmt(y1)}" x2="{fmt(x2)}" y2="{fmt(y2)}" stroke="{stroke}" stroke-width="{fmt(width)}"{extra}/>'
        )

    def rect(self, x, y, w, h, fill, stroke="none", extra=""):
        self.add(
            f'<rect x="{fmt(x)}" y="{fmt(y)}" width="{fmt(w)}" height="{fmt(h)}" fill="{fill}" stroke="{stroke}"{extra}/>'
        )

    def circle(self, x, y, r, fill, stroke="none", cls=None):
        c = f' class="{cls}"' if cls else ""
        self.add(f'<circle{c} cx="{fmt(x)}" cy="{fmt(y)}" r="{fmt(r)}" fill="{fill}" stroke="{stroke}"/>')

    def render(self, title: str) -> str:
        head = (
            '<?xml version="1.0" encoding="UTF-8"?>\n'
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}" font-family="sans-serif">\n'
            f"<title>{escape(title)}</title>\n"
            f'<rect x="0" y="0" width="{self.width}" height="{self.height}" fill="#ffffff"/>\n'
        )
        return head + "\n".join(self.parts) + "\n</svg>\n"


def _axes(svg: _Svg, frame: _Frame, xlabel="", ylabel="", ticks=True, size=11):
    x0, y0, w, h = frame.x0, frame.y0, frame.w, frame.h
    svg.line(x0, y0 + h, x0 + w, y0 + h)
    svg.line(x0, y0, x0, y0 + h)
    if ticks:
        for t in nice_ticks(*frame.xlim):
            px = frame.x(t)
            svg.line(px, y0 + h, px, y0 + h + 4)
            svg.text(px, y0 + h + 16, fmt(t), size=size - 1)
        for t in nice_ticks(*frame.ylim):
            py = frame.y(t)
            svg.line(x0 - 4, py, x0, py)
            svg.text(x0 - 6, py + 4, fmt(t), size=size - 1, anchor="end")
    if xlabel:
        svg.text(x0 + w / 2, y0 + h + 36, xlabel, size=size)
    if ylabel:
        svg.text(x0 - 48, y0 + h / 2, ylabel, size=size, rotate=-90)


def _legend(svg: _Svg, entries: Sequence[tuple[str, str]], x: float, y: float):
    for i, (label, color) in enumerate(entries):
        yy = y + 16 * i
        svg.rect(x, yy - 9, 10, 10, color)
        svg.text(x + 14, yy, label, size=11, anchor="start")


def _main_frame(xlim, ylim, width=WIDTH, height=HEIGHT) -> _Frame:
    top, right, bottom, left = MARGIN
    return _Frame(left, top, width - left - right, height - top - bottom, xlim, ylim)


# ----------------------------------------------------------------- renderers


def _render_histogram(spec: ChartSpec, svg: _Svg):
    values = np.asarray(spec.series["values"], dtype=np.float64)
    edges, counts = histogram_bins(values, spec.options.get("bins", 30))
    frame = _main_frame((edges[0], edges[-1]), (0, max(int(counts.max()), 1) * 1.05))
    _axes(svg, frame, spec.options.get("xlabel", ""), spec.options.get("ylabel", "count"))
    color = spec.options.get("color", PALETTE[0])
    if len(counts) == 1:
        x = frame.x(edges[0])
        svg.rect(x - 4, frame.y(counts[0]), 8, frame.y(0) - frame.y(counts[0]), color)
    else:
        for left, right, c in zip(edges[:-1], edges[1:], counts):
            if c:
                svg.rect(frame.x(left), frame.y(c), frame.x(right) - frame.x(left), frame.y(0) - frame.y(c), color,
                         stroke="#ffffff", extra=' class="bar"')
    rows = [["bin_left", "bin_right", "count"]] + [[fmt(a), fmt(b), str(int(c))] for a, b, c in zip(edges[:-1], edges[1:], counts)]
    return rows


def _render_bar(spec: ChartSpec, svg: _Svg):
    names = list(spec.series)
    heights = [np.asarray(spec.series[n], dtype=np.float64) for n in names]
    n = len(heights[0])
    cats = list(spec.options.get("categories", [str(i + 1) for i in range(n)]))
    frame = _main_frame((0, n), _limits(np.concatenate(heights), include_zero=True))
    _axes(svg, frame, spec.options.get("xlabel", ""), spec.options.get("ylabel", ""), ticks=False)
    for t in nice_ticks(*frame.ylim):
        svg.line(frame.x0 - 4, frame.y(t), frame.x0, frame.y(t))
        svg.text(frame.x0 - 6, frame.y(t) + 4, fmt(t), size=10, anchor="end")
    group_w = 0.8 / len(names)
    for s, (name, h) in enumerate(zip(names, heights)):
        color = PALETTE[s % len(PALETTE)]
        for i, v in enumerate(h):
            left = i + 0.1 + s * group_w
            top, bottom = (v, 0.0) if v >= 0 else (0.0, v)
            svg.rect(frame.x(left), frame.y(top), frame.x(left + group_w) - frame.x(left), frame.y(bottom) - frame.y(top),
                     color, extra=' class="bar"')
    for i, c in enumerate(cats):
        svg.text(frame.x(i + 0.5), frame.y0 + frame.h + 16, c, size=10)
    if len(names) > 1:
        _legend(svg, [(nm, PALETTE[i % len(PALETTE)]) for i, nm in enumerate(names)], frame.x0 + frame.w - 120, frame.y0 + 10)
    rows = [["category"] + names] + [[c] + [fmt(h[i]) for h in heights] for i, c in enumerate(cats)]
    return rows


def _render_line(spec: ChartSpec, svg: _Svg):
    x = np.asarray(spec.series["x"], dtype=np.float64)
    ys = {k: np.asarray(v, dtype=np.float64) for k, v in spec.series.items() if k != "x"}
    frame = _main_frame(_limits(x), _limits(np.concatenate(list(ys.values()))))
    _axes(svg, frame, spec.options.get("xlabel", "x"), spec.options.get("ylabel", ""))
    for s, (name, y) in enumerate(ys.items()):
        color = PALETTE[s % len(PALETTE)]
        pts = " ".join(f"{fmt(frame.x(a))},{fmt(frame.y(b))}" for a, b in zip(x, y))
        svg.add(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for a, b in zip(x, y):
            svg.circle(frame.x(a), frame.y(b), 3, color)
    marker = spec.options.get("marker_x")
    if marker is not None:
        px = frame.x(marker)
        svg.line(px, frame.y0, px, frame.y0 + frame.h, stroke=PALETTE[1], extra=' stroke-dasharray="4 3" class="marker"')
    _legend(svg, [(nm, PALETTE[i % len(PALETTE)]) for i, nm in enumerate(ys)], frame.x0 + frame.w - 120, frame.y0 + 10)
    rows = [["x"] + list(ys)] + [[fmt(x[i])] + [fmt(y[i]) for y in ys.values()] for i in range(len(x))]
    return rows


def _render_scatter(spec: ChartSpec, svg: _Svg):
    x = np.asarray(spec.series["x"], dtype=np.float64)
    y = np.asarray(spec.series["y"], dtype=np.float64)
    group = np.asarray(spec.series.get("group", np.zeros(len(x))), dtype=np.int64)
    highlight = np.asarray(spec.series.get("highlight", np.zeros(len(x))), dtype=np.int64)
    arrows = spec.options.get("arrows", [])
    xs = np.concatenate([x, [a[1] for a in arrows]]) if arrows else x
    ys = np.concatenate([y, [a[2] for a in arrows]]) if arrows else y
    frame = _main_frame(_limits(np.append(xs, 0) if arrows else xs), _limits(np.append(ys, 0) if arrows else ys))
    _axes(svg, frame, spec.options.get("xlabel", "x"), spec.options.get("ylabel", "y"))
    colors = spec.options.get("colors", PALETTE)
    for i in np.argsort(highlight, kind="stable"):
        if highlight[i]:
            svg.circle(frame.x(x[i]), frame.y(y[i]), 4.5, PALETTE[1], stroke="#000000", cls="highlight")
        else:
            svg.circle(frame.x(x[i]), frame.y(y[i]), 2.5, colors[group[i] % len(colors)], cls=f"g{group[i]}")
    for label, dx, dy in arrows:
        svg.line(frame.x(0), frame.y(0), frame.x(dx), frame.y(dy), stroke=PALETTE[1], width=2, extra=' class="arrow"')
        svg.text(frame.x(dx), frame.y(dy) - 4, label, size=10)
    if group.size and group.max() > 0:
        _legend(svg, [(f"cluster {g}", colors[g % len(colors)]) for g in np.unique(group)], frame.x0 + frame.w - 100, frame.y0 + 10)
    rows = [["x", "y", "group", "highlight"]] + [[fmt(a), fmt(b), str(int(g)), str(int(h))] for a, b, g, h in zip(x, y, group, highlight)]
    if arrows:
        rows += [["arrow", "dx", "dy", ""]] + [[lab, fmt(dx), fmt(dy), ""] for lab, dx, dy in arrows]
    return rows


def _heat_color(v: float) -> str:
    # diverging blue-white-red on [-1, 1]
    v = max(-1.0, min(1.0, float(v)))
    if v >= 0:
        r, g, b = 255, int(round(255 * (1 - v))), int(round(255 * (1 - v)))
    else:
        r, g, b = int(round(255 * (1 + v))), int(round(255 * (1 + v))), 255
    return f"#{r:02x}{g:02x}{b:02x}"


def _render_heatmap(spec: ChartSpec, svg: _Svg):
    m = np.asarray(spec.series["matrix"], dtype=np.float64)
    labels = list(spec.options.get("labels", [str(i) for i in range(m.shape[0])]))
    n = m.shape[0]
    left, top = 170, 60
    size = min(WIDTH - left - 20, HEIGHT - top - 120)
    cell = size / n
    for i in range(n):
        for j in range(n):
            svg.rect(left + j * cell, top + i * cell, cell, cell, _heat_color(m[i, j]), stroke="#ffffff", extra=' class="cell"')
            svg.text(left + (j + 0.5) * cell, top + (i + 0.5) * cell + 4, format(m[i, j], ".2f"), size=max(6, min(11, int(cell / 4))))
        svg.text(left - 6, top + (i + 0.5) * cell + 4, labels[i], size=10, anchor="end")
        svg.text(left + (i + 0.5) * cell, top + size + 12, labels[i], size=10, anchor="end", rotate=-45)
    rows = [[""] + labels] + [[labels[i]] + [fmt(v) for v in m[i]] for i in range(n)]
    return rows


def _render_pairplot(spec: ChartSpec, svg: _Svg):
    group = np.asarray(spec.series.get("group", []), dtype=np.int64)
    dims = [k for k in spec.series if k != "group"]
    data = [np.asarray(spec.series[k], dtype=np.float64) for k in dims]
    q = len(dims)
    if group.size == 0:
        group = np.zeros(len(data[0]), dtype=np.int64)
    left, top = 50, 50
    cell = (min(svg.width, svg.height) - left - 20) / q
    colors = spec.options.get("colors", PALETTE)
    for i in range(q):
        for j in range(q):
            x0, y0 = left + j * cell, top + i * cell
            pad = cell * 0.08
            svg.rect(x0 + pad / 2, y0 + pad / 2, cell - pad, cell - pad, "none", stroke="#999999",
                     extra=f' class="panel" data-row="{i}" data-col="{j}"')
            if i == j:
                edges, counts = histogram_bins(data[i], spec.options.get("bins", 15))
                frame = _Frame(x0 + pad, y0 + pad, cell - 2 * pad, cell - 2 * pad, (edges[0], edges[-1]), (0, max(int(counts.max()), 1)))
                for a, b, c in zip(edges[:-1], edges[1:], counts):
                    if c:
                        svg.rect(frame.x(a), frame.y(c), max(frame.x(b) - frame.x(a), 1.0), frame.y(0) - frame.y(c), PALETTE[0], extra=' class="bar"')
            else:
                frame = _Frame(x0 + pad, y0 + pad, cell - 2 * pad, cell - 2 * pad, _limits(data[j]), _limits(data[i]))
                for a, b, g in zip(data[j], data[i], group):
                    svg.circle(frame.x(a), frame.y(b), 1.5, colors[g % len(colors)])
        svg.text(left - 8, top + (i + 0.5) * cell, dims[i], size=10, anchor="end")
        svg.text(left + (i + 0.5) * cell, top - 8, dims[i], size=10)
    rows = [dims + ["group"]] + [[fmt(d[r]) for d in data] + [str(int(group[r]))] for r in range(len(group))]
    return rows


_RENDERERS = {
    "histogram": _render_histogram,
    "bar": _render_bar,
    "line": _render_line,
    "scatter": _render_scatter,
    "heatmap": _render_heatmap,
    "pairplot": _render_pairplot,
}


def render_chart_with_data(spec: ChartSpec) -> tuple[str, list[list[str]]]:
    spec.validate()
    if spec.kind == "pairplot":
        q = len([k for k in spec.series if k != "group"])
        side = max(480, 50 + 20 + 120 * q)
        svg = _Svg(side, side)
    else:
        svg = _Svg()
    svg.text(svg.width / 2, 28, spec.title, size=15, weight="bold")
    rows = _RENDERERS[spec.kind](spec, svg)
    return svg.render(spec.title), rows


def render_chart(spec: ChartSpec) -> str:
    """The chart as a standalone SVG document."""
    return render_chart_with_data(spec)[0]


def write_chart(spec: ChartSpec) -> tuple[Path, Path]:
    """Write ``<output_path>.svg`` and the plotted numbers to ``<output_path>.csv``."""
    if spec.output_path is None:
        raise SpecError("chart has no output path")
    svg_text, rows = render_chart_with_data(spec)
    base = Path(spec.output_path).with_suffix("")
    svg_path, csv_path = base.with_suffix(".svg"), base.with_suffix(".csv")
    svg_path.parent.mkdir(parents=True, exist_ok=True)
    svg_path.write_text(svg_text, encoding="utf-8")
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    csv_path.write_text(buf.getvalue(), encoding="utf-8")
    return svg_path, csv_path


def sha256_file(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def write_manifest(directory: str | Path, name: str = "manifest.txt") -> Path:
    """List every file under ``directory`` (except the manifest) with its SHA-256."""
    directory = Path(directory)
    target = directory / name
    lines = []
    for path in sorted(p for p in directory.rglob("*") if p.is_file() and p != target):
        lines.append(f"{sha256_file(path)}  {path.relative_to(directory).as_posix()}")
    target.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return target
