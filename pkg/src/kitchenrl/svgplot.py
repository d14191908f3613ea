"""Static SVG charts: learning curves with error bands and %AUC bars.

Hand-assembled SVG strings; no graphics dependency. Geometry is plain
linear scaling into a fixed viewport.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

WIDTH, HEIGHT = 720, 420
MARGIN = {"left": 64, "right": 170, "top": 40, "bottom": 48}

PALETTE = ("#c0392b", "#2980b9", "#27ae60", "#8e44ad",
           "#e67e22", "#16a085", "#7f8c8d", "#2c3e50")


@dataclass
class Series:
    label: str
    x: list
    mean: list
    err: Optional[list] = None  # stderr half-width, same length as mean


def _scale(lo: float, hi: float, a: float, b: float):
    span = hi - lo if hi > lo else 1.0
    return lambda v: a + (v - lo) / span * (b - a)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** int(f"{raw:e}".split("e")[1])
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    first = int(lo / step) * step
    out = []
    t = first
    while t <= hi + step * 1e-9:
        if t >= lo - step * 1e-9:
            out.append(round(t, 10))
        t += step
    return out


def _fmt(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        iv = int(v)
        return f"{iv//1000}k" if iv and iv % 1000 == 0 else str(iv)
    return f"{v:g}"


def _axes(xlo, xhi, ylo, yhi, title, xlabel, ylabel) -> tuple[list[str], object, object]:
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    sx, sy = _scale(xlo, xhi, x0, x1), _scale(ylo, yhi, y0, y1)
    parts = [
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{(x0 + x1) / 2:.1f}" y="22" text-anchor="middle" '
        f'font-size="15" font-family="sans-serif">{title}</text>',
    ]
    for t in _ticks(xlo, xhi):
        px = sx(t)
        parts.append(f'<line x1="{px:.1f}" y1="{y0}" x2="{px:.1f}" '
                     f'y2="{y0 + 5}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{y0 + 18}" text-anchor="middle" '
                     f'font-size="11" font-family="sans-serif">{_fmt(t)}</text>')
    for t in _ticks(ylo, yhi):
        py = sy(t)
        parts.append(f'<line x1="{x0 - 5}" y1="{py:.1f}" x2="{x0}" '
                     f'y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<line x1="{x0}" y1="{py:.1f}" x2="{x1}" y2="{py:.1f}" '
                     f'stroke="#eeeeee"/>')
        parts.append(f'<text x="{x0 - 8}" y="{py + 4:.1f}" text-anchor="end" '
                     f'font-size="11" font-family="sans-serif">{_fmt(t)}</text>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>')
    parts.append(f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>')
    parts.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 10}" '
                 f'text-anchor="middle" font-size="12" '
                 f'font-family="sans-serif">{xlabel}</text>')
    parts.append(f'<text x="16" y="{(y0 + y1) / 2:.1f}" text-anchor="middle" '
                 f'font-size="12" font-family="sans-serif" '
                 f'transform="rotate(-90 16 {(y0 + y1) / 2:.1f})">{ylabel}</text>')
    return parts, sx, sy


def line_chart(series: list[Series], title: str = "", xlabel: str = "",
               ylabel: str = "", y_range: Optional[tuple] = None) -> str:
    xs = [v for s in series for v in s.x]
    ys = [v for s in series for v in s.mean]
    if y_range is None:
        ylo, yhi = min(ys, default=0.0), max(ys, default=1.0)
        pad = 0.05 * (yhi - ylo or 1.0)
        ylo, yhi = ylo - pad, yhi + pad
    else:
        ylo, yhi = y_range
    xlo, xhi = min(xs, default=0.0), max(xs, default=1.0)
    parts, sx, sy = _axes(xlo, xhi, ylo, yhi, title, xlabel, ylabel)

    for i, s in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        if s.err is not None:
            top = [(sx(x), sy(m + e)) for x, m, e in zip(s.x, s.mean, s.err)]
            bot = [(sx(x), sy(m - e)) for x, m, e in zip(s.x, s.mean, s.err)]
            pts = " ".join(f"{px:.1f},{py:.1f}" for px, py in top + bot[::-1])
            parts.append(f'<polygon points="{pts}" fill="{color}" '
                         f'fill-opacity="0.15" stroke="none"/>')
        pts = " ".join(f"{sx(x):.1f},{sy(m):.1f}" for x, m in zip(s.x, s.mean))
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="2"/>')
        ly = MARGIN["top"] + 16 * i + 8
        lx = WIDTH - MARGIN["right"] + 12
        parts.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{lx + 24}" y="{ly + 4}" font-size="11" '
                     f'font-family="sans-serif">{s.label}</text>')
    return _document(parts)


def bar_chart(labels: list[str], values: list[float], title: str = "",
              ylabel: str = "") -> str:
    yhi = max(max(values, default=0.0) * 1.1, 1.0)
    parts, _, sy = _axes(0.0, 1.0, 0.0, yhi, title, "", ylabel)
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0 = HEIGHT - MARGIN["bottom"]
    n = max(len(values), 1)
    slot = (x1 - x0) / n
    bar_w = slot * 0.6
    for i, (label, value) in enumerate(zip(labels, values)):
        color = PALETTE[i % len(PALETTE)]
        cx = x0 + slot * (i + 0.5)
        py = sy(value)
        parts.append(f'<rect x="{cx - bar_w / 2:.1f}" y="{py:.1f}" '
                     f'width="{bar_w:.1f}" height="{y0 - py:.1f}" '
                     f'fill="{color}" fill-opacity="0.85"/>')
        parts.append(f'<text x="{cx:.1f}" y="{py - 5:.1f}" text-anchor="middle" '
                     f'font-size="11" font-family="sans-serif">{value:.1f}</text>')
        parts.append(f'<text x="{cx:.1f}" y="{y0 + 14}" text-anchor="end" '
                     f'font-size="10" font-family="sans-serif" '
                     f'transform="rotate(-30 {cx:.1f} {y0 + 14})">{label}</text>')
    return _document(parts)


def _document(parts: list[str]) -> str:
    body = "\n".join(parts)
    return (f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
            f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">\n{body}\n</svg>\n')
