"""Standalone SVG line plots: polylines, point markers and labelled axes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence
from xml.sax.saxutils import escape

import numpy as np

WIDTH, HEIGHT = 800, 600
MARGIN = (70, 30, 40, 60)  # left, right, top, bottom
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass
class Plot:
    title: str
    xlabel: str
    ylabel: str
    logx: bool = False
    logy: bool = False
    lines: list = field(default_factory=list)
    markers: list = field(default_factory=list)
    guides: list = field(default_factory=list)

    def line(self, x, y, label: str = "", color: str | None = None) -> None:
        color = color or PALETTE[len(self.lines) % len(PALETTE)]
        self.lines.append((np.asarray(x, float), np.asarray(y, float), label, color))

    def marker(self, x: float, y: float, label: str) -> None:
        self.markers.append((float(x), float(y), label))

    def guide(self, x, y, label: str = "") -> None:
        """Dashed trace, e.g. a barrier cut by the projection plane."""
        self.guides.append((np.asarray(x, float), np.asarray(y, float), label))

    # -------------------------------------------------------------- layout

    def _tx(self, v):
        return np.log10(v) if self.logx else v

    def _ty(self, v):
        return np.log10(v) if self.logy else v

    def _ranges(self) -> tuple:
        xs, ys = [], []
        for x, y, *_ in self.lines:
            ok = self._finite(x, y)
            xs.append(self._tx(x[ok]))
            ys.append(self._ty(y[ok]))
        for x, y, _ in self.markers:
            if self._finite(np.array([x]), np.array([y]))[0]:
                xs.append(self._tx(np.array([x])))
                ys.append(self._ty(np.array([y])))
        x = np.concatenate(xs) if xs else np.array([0.0, 1.0])
        y = np.concatenate(ys) if ys else np.array([0.0, 1.0])
        return _pad(x), _pad(y)

    def _finite(self, x, y):
        ok = np.isfinite(x) & np.isfinite(y)
        if self.logx:
            ok &= x > 0
        if self.logy:
            ok &= y > 0
        return ok

    def render(self) -> str:
        (x0, x1), (y0, y1) = self._ranges()
        left, right, top, bottom = MARGIN
        pw, ph = WIDTH - left - right, HEIGHT - top - bottom

        def px(v):
            return left + (v - x0) / (x1 - x0) * pw

        def py(v):
            return top + (y1 - v) / (y1 - y0) * ph

        out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {WIDTH} {HEIGHT}" '
               f'width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">',
               f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
               f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="15">{escape(self.title)}</text>',
               f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
        for t in _ticks(x0, x1):
            X = px(t)
            out.append(f'<line x1="{X:.2f}" y1="{top + ph}" x2="{X:.2f}" y2="{top + ph + 5}" stroke="black"/>')
            out.append(f'<text x="{X:.2f}" y="{top + ph + 18}" text-anchor="middle">'
                       f'{_fmt(t, self.logx)}</text>')
        for t in _ticks(y0, y1):
            Y = py(t)
            out.append(f'<line x1="{left - 5}" y1="{Y:.2f}" x2="{left}" y2="{Y:.2f}" stroke="black"/>')
            out.append(f'<text x="{left - 8}" y="{Y + 4:.2f}" text-anchor="end">{_fmt(t, self.logy)}</text>')
        out.append(f'<text x="{left + pw / 2}" y="{HEIGHT - 15}" text-anchor="middle">{escape(self.xlabel)}</text>')
        out.append(f'<text x="18" y="{top + ph / 2}" text-anchor="middle" '
                   f'transform="rotate(-90 18 {top + ph / 2})">{escape(self.ylabel)}</text>')
        out.append(f'<clipPath id="plot"><rect x="{left}" y="{top}" width="{pw}" height="{ph}"/></clipPath>')
        out.append('<g clip-path="url(#plot)">')
        for x, y, label in self.guides:
            ok = self._finite(x, y)
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(self._tx(x[ok]), self._ty(y[ok])))
            out.append(f'<polyline points="{pts}" fill="none" stroke="#888" stroke-dasharray="6 4"/>')
        for x, y, label, color in self.lines:
            ok = self._finite(x, y)
            pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(self._tx(x[ok]), self._ty(y[ok])))
            out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y, label in self.markers:
            if not self._finite(np.array([x]), np.array([y]))[0]:
                continue
            X, Y = px(self._tx(x)), py(self._ty(y))
            out.append(f'<circle cx="{X:.2f}" cy="{Y:.2f}" r="4" fill="black"/>')
            out.append(f'<text x="{X + 6:.2f}" y="{Y - 6:.2f}">{escape(label)}</text>')
        out.append("</g>")
        legend = [(label, color) for *_, label, color in self.lines if label]
        legend += [(label, "#888") for *_, label in self.guides if label]
        for k, (label, color) in enumerate(legend):
            Y = top + 16 + 16 * k
            out.append(f'<line x1="{left + pw - 150}" y1="{Y - 4}" x2="{left + pw - 130}" y2="{Y - 4}" '
                       f'stroke="{color}" stroke-width="2"/>')
            out.append(f'<text x="{left + pw - 125}" y="{Y}">{escape(label)}</text>')
        out.append("</svg>")
        return "\n".join(out) + "\n"


def _pad(v: np.ndarray) -> tuple:
    lo, hi = float(np.min(v)), float(np.max(v))
    if hi - lo < 1e-12 * max(1.0, abs(hi)):
        lo, hi = lo - 0.5, hi + 0.5
    d = 0.05 * (hi - lo)
    return lo - d, hi + d


def _ticks(lo: float, hi: float, target: int = 6) -> list:
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = min((k * mag for k in (1, 2, 5, 10)), key=lambda s: abs(s - raw))
    start = math.ceil(lo / step) * step
    return [start + k * step for k in range(int((hi - start) / step) + 1)]


def _fmt(t: float, log: bool) -> str:
    if log:
        return f"1e{t:g}"
    return f"{t:.4g}"


def phase_projection(title: str, orbits: Sequence, axes: tuple, labels: Sequence[str],
                     points: Sequence = (), guides: Sequence = ()) -> Plot:
    """Projection of finite-chart orbits on two of X, Y, Z (``axes`` are column indices)."""
    names = "XYZ"
    plot = Plot(title, names[axes[0]], names[axes[1]])
    for xyz, label in zip(orbits, labels):
        plot.line(xyz[:, axes[0]], xyz[:, axes[1]], label)
    for pid, c in points:
        plot.marker(c[axes[0]], c[axes[1]], pid)
    for x, y, label in guides:
        plot.guide(x, y, label)
    return plot
