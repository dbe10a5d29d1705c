"""Minimal static SVG plot emitter with a plain-text data sidecar.

Good enough for the scan-contour and trend figures: one axes box, tick
labels, a polyline (optionally with markers) per series, and a legend.  Each
plot also writes ``<name>.dat`` with the series columns so the numbers are
greppable without an SVG viewer.
"""

from dataclasses import dataclass, field
import math
from pathlib import Path

import numpy as np

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


@dataclass(frozen=True)
class Series:
    """One named curve."""

    name: str
    x: np.ndarray
    y: np.ndarray
    color: str | None = None
    dashed: bool = False
    markers: bool = False

    def __post_init__(self):
        object.__setattr__(self, "x", np.asarray(self.x, dtype=float))
        object.__setattr__(self, "y", np.asarray(self.y, dtype=float))
        if self.x.ndim != 1 or self.x.shape != self.y.shape:
            raise ValueError(f"series {self.name!r}: x and y must be matching 1-d arrays")
        if self.x.size == 0:
            raise ValueError(f"series {self.name!r}: empty series")


def _ticks(lo, hi, n=5):
    if lo == hi:
        lo, hi = lo - 1.0, hi + 1.0
    span = hi - lo
    step = 10.0 ** math.floor(math.log10(span / n))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if span / (step * mult) <= n + 1:
            step *= mult
            break
    first = math.ceil(lo / step) * step
    ticks = []
    v = first
    while v <= hi + 1e-12 * span:
        ticks.append(0.0 if abs(v) < 1e-12 * span else v)
        v += step
    return ticks


def _fmt(v):
    return f"{v:.6g}"


def emit_plot(series, path, title: str = "", xlabel: str = "", ylabel: str = "",
              width: int = 640, height: int = 420) -> Path:
    """Write an SVG figure and a delimited sidecar; returns the SVG path."""
    if not series:
        raise ValueError("no series to plot")
    path = Path(path)
    xs = np.concatenate([s.x for s in series])
    ys = np.concatenate([s.y for s in series])
    finite = np.isfinite(xs) & np.isfinite(ys)
    if not np.any(finite):
        raise ValueError("all series values are non-finite")
    xlo, xhi = float(xs[finite].min()), float(xs[finite].max())
    ylo, yhi = float(ys[finite].min()), float(ys[finite].max())
    if xlo == xhi:
        xlo, xhi = xlo - 1.0, xhi + 1.0
    if ylo == yhi:
        ylo, yhi = ylo - 1.0, yhi + 1.0
    pad_y = 0.06 * (yhi - ylo)
    ylo, yhi = ylo - pad_y, yhi + pad_y
    ml, mr, mt, mb = 64, 16, 28, 46
    pw, ph = width - ml - mr, height - mt - mb

    def px(x):
        return ml + (x - xlo) / (xhi - xlo) * pw

    def py(y):
        return mt + (yhi - y) / (yhi - ylo) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
           f'height="{height}" viewBox="0 0 {width} {height}">',
           f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
           f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
           'stroke="black" stroke-width="1"/>']
    if title:
        out.append(f'<text x="{width / 2}" y="{mt - 10}" text-anchor="middle" '
                   f'font-size="14">{title}</text>')
    for tx in _ticks(xlo, xhi):
        out.append(f'<line x1="{px(tx):.1f}" y1="{mt + ph}" x2="{px(tx):.1f}" '
                   f'y2="{mt + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px(tx):.1f}" y="{mt + ph + 18}" '
                   f'text-anchor="middle" font-size="11">{_fmt(tx)}</text>')
    for ty in _ticks(ylo, yhi):
        out.append(f'<line x1="{ml - 5}" y1="{py(ty):.1f}" x2="{ml}" '
                   f'y2="{py(ty):.1f}" stroke="black"/>')
        out.append(f'<text x="{ml - 8}" y="{py(ty) + 4:.1f}" text-anchor="end" '
                   f'font-size="11">{_fmt(ty)}</text>')
    if xlabel:
        out.append(f'<text x="{ml + pw / 2}" y="{height - 8}" '
                   f'text-anchor="middle" font-size="12">{xlabel}</text>')
    if ylabel:
        out.append(f'<text x="14" y="{mt + ph / 2}" text-anchor="middle" '
                   f'font-size="12" transform="rotate(-90 14 {mt + ph / 2})">'
                   f'{ylabel}</text>')
    for i, s in enumerate(series):
        color = s.color or _COLORS[i % len(_COLORS)]
        dash = ' stroke-dasharray="6 4"' if s.dashed else ""
        ok = np.isfinite(s.x) & np.isfinite(s.y)
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(s.x[ok], s.y[ok]))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   f'stroke-width="1.5"{dash}/>')
        if s.markers:
            for a, b in zip(s.x[ok], s.y[ok]):
                out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" '
                           f'fill="{color}"/>')
        out.append(f'<text x="{ml + pw - 6}" y="{mt + 16 + 14 * i}" '
                   f'text-anchor="end" font-size="11" fill="{color}">{s.name}</text>')
    out.append("</svg>")
    path.write_text("\n".join(out) + "\n")

    sidecar = path.with_suffix(".dat")
    lines = ["# " + "\t".join(f"{s.name}.x\t{s.name}.y" for s in series)]
    nmax = max(s.x.size for s in series)
    for i in range(nmax):
        cells = []
        for s in series:
            if i < s.x.size:
                cells.extend([repr(float(s.x[i])), repr(float(s.y[i]))])
            else:
                cells.extend(["nan", "nan"])
        lines.append("\t".join(cells))
    sidecar.write_text("\n".join(lines) + "\n")
    return path
