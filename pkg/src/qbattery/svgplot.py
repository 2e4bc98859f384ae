"""Minimal deterministic SVG line plots."""

from __future__ import annotations

import math
import xml.etree.ElementTree as ET
from dataclasses import dataclass

import numpy as np

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


@dataclass(frozen=True)
class Series:
    label: str
    x: np.ndarray
    y: np.ndarray
    dashed: bool = False


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    span = hi - lo
    raw = span / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    first = math.ceil(lo / step - 1e-9) * step
    out = []
    v = first
    while v <= hi + 1e-9 * span:
        out.append(round(v, 12))
        v += step
    return out


def _tick_label(v: float) -> str:
    return f"{v:g}"


def line_plot(
    series: list[Series],
    x_label: str,
    y_label: str,
    x_range: tuple[float, float],
    y_range: tuple[float, float],
    title: str = "",
    width: int = 640,
    height: int = 420,
) -> str:
    """Render ``series`` as polylines; NaN samples break a curve into segments."""
    left, right, top, bottom = 70, 170, 40, 55
    pw, ph = width - left - right, height - top - bottom
    x0, x1 = x_range
    y0, y1 = y_range

    def px(x):
        return left + (x - x0) / (x1 - x0) * pw

    def py(y):
        return top + (1 - (y - y0) / (y1 - y0)) * ph

    svg = ET.Element(
        "svg",
        xmlns="http://www.w3.org/2000/svg",
        width=str(width),
        height=str(height),
        viewBox=f"0 0 {width} {height}",
    )
    ET.SubElement(svg, "rect", x="0", y="0", width=str(width), height=str(height), fill="white")
    if title:
        t = ET.SubElement(svg, "text", x=_fmt(left + pw / 2), y="22", attrib={"text-anchor": "middle", "font-size": "15"})
        t.text = title

    axes = ET.SubElement(svg, "g", stroke="black", attrib={"stroke-width": "1"})
    ET.SubElement(axes, "rect", x=_fmt(left), y=_fmt(top), width=_fmt(pw), height=_fmt(ph), fill="none")
    labels = ET.SubElement(svg, "g", attrib={"font-size": "11", "font-family": "sans-serif"})
    for v in _ticks(x0, x1):
        X = px(v)
        ET.SubElement(axes, "line", x1=_fmt(X), y1=_fmt(top + ph), x2=_fmt(X), y2=_fmt(top + ph + 5))
        lab = ET.SubElement(labels, "text", x=_fmt(X), y=_fmt(top + ph + 18), attrib={"text-anchor": "middle"})
        lab.text = _tick_label(v)
    for v in _ticks(y0, y1):
        Y = py(v)
        ET.SubElement(axes, "line", x1=_fmt(left - 5), y1=_fmt(Y), x2=_fmt(left), y2=_fmt(Y))
        lab = ET.SubElement(labels, "text", x=_fmt(left - 8), y=_fmt(Y + 4), attrib={"text-anchor": "end"})
        lab.text = _tick_label(v)
    xl = ET.SubElement(svg, "text", x=_fmt(left + pw / 2), y=_fmt(height - 12), attrib={"text-anchor": "middle", "font-size": "13"})
    xl.text = x_label
    yl = ET.SubElement(
        svg,
        "text",
        x="18",
        y=_fmt(top + ph / 2),
        transform=f"rotate(-90 18 {_fmt(top + ph / 2)})",
        attrib={"text-anchor": "middle", "font-size": "13"},
    )
    yl.text = y_label

    curves = ET.SubElement(svg, "g", fill="none", attrib={"stroke-width": "1.6"})
    legend = ET.SubElement(svg, "g", attrib={"font-size": "11", "font-family": "sans-serif"})
    for i, s in enumerate(series):
        colour = PALETTE[i % len(PALETTE)]
        extra = {"stroke-dasharray": "6 3"} if s.dashed else {}
        x = np.asarray(s.x, dtype=float)
        y = np.clip(np.asarray(s.y, dtype=float), y0, y1)
        ok = np.isfinite(y)
        segment: list[str] = []
        for xi, yi, good in zip(x, y, ok):
            if good:
                segment.append(f"{_fmt(px(xi))},{_fmt(py(yi))}")
            elif segment:
                ET.SubElement(curves, "polyline", points=" ".join(segment), stroke=colour, attrib=extra)
                segment = []
        if segment:
            ET.SubElement(curves, "polyline", points=" ".join(segment), stroke=colour, attrib=extra)
        ly = top + 12 + 18 * i
        ET.SubElement(legend, "line", x1=_fmt(left + pw + 12), y1=_fmt(ly), x2=_fmt(left + pw + 36), y2=_fmt(ly), stroke=colour, attrib={"stroke-width": "2", **extra})
        text = ET.SubElement(legend, "text", x=_fmt(left + pw + 42), y=_fmt(ly + 4))
        text.text = s.label
    ET.indent(svg)
    return ET.tostring(svg, encoding="unicode") + "\n"
