"""Minimal self-contained SVG line plots.

Emits axes, tick labels, a legend and one polyline per series — enough for
visual inspection of trajectories without any plotting dependency. The CSV
outputs remain the quantitative record.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import AnalysisError

_WIDTH, _HEIGHT = 720, 440
_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 70, 20, 40, 50
_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd",
           "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f")


def _ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / target
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if step >= raw:
            break
    first = math.ceil(lo / step) * step
    out = []
    value = first
    while value <= hi + 1e-9 * step:
        out.append(round(value, 12))
        value += step
    return out


def _fmt(value: float) -> str:
    if value == 0:
        return "0"
    if abs(value) >= 1e4 or abs(value) < 1e-3:
        return "%.1e" % value
    return ("%.4g" % value)


def write_plot(path: Union[str, Path],
               series: Sequence[tuple[str, np.ndarray, np.ndarray]],
               title: str = "", xlabel: str = "", ylabel: str = "") -> None:
    """Write an SVG with one polyline per (label, x, y) series."""
    if not series:
        raise AnalysisError("plot needs at least one series")
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    x_lo, x_hi = float(xs.min()), float(xs.max())
    y_lo, y_hi = float(ys.min()), float(ys.max())
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def sx(x):
        return _MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(y):
        return _MARGIN_T + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" width="%d" height="%d" '
        'font-family="sans-serif" font-size="12">' % (_WIDTH, _HEIGHT),
        '<rect width="%d" height="%d" fill="white"/>' % (_WIDTH, _HEIGHT),
        '<rect x="%d" y="%d" width="%d" height="%d" fill="none" '
        'stroke="black"/>' % (_MARGIN_L, _MARGIN_T, plot_w, plot_h),
    ]
    if title:
        parts.append('<text x="%d" y="%d" text-anchor="middle" '
                     'font-size="14">%s</text>'
                     % (_WIDTH // 2, _MARGIN_T - 14, _escape(title)))
    for tick in _ticks(x_lo, x_hi):
        x = sx(tick)
        parts.append('<line x1="%.1f" y1="%d" x2="%.1f" y2="%d" '
                     'stroke="black"/>' % (x, _HEIGHT - _MARGIN_B,
                                           x, _HEIGHT - _MARGIN_B + 5))
        parts.append('<text x="%.1f" y="%d" text-anchor="middle">%s</text>'
                     % (x, _HEIGHT - _MARGIN_B + 18, _fmt(tick)))
    for tick in _ticks(y_lo, y_hi):
        y = sy(tick)
        parts.append('<line x1="%d" y1="%.1f" x2="%d" y2="%.1f" '
                     'stroke="black"/>' % (_MARGIN_L - 5, y, _MARGIN_L, y))
        parts.append('<text x="%d" y="%.1f" text-anchor="end" '
                     'dominant-baseline="middle">%s</text>'
                     % (_MARGIN_L - 8, y, _fmt(tick)))
    if xlabel:
        parts.append('<text x="%d" y="%d" text-anchor="middle">%s</text>'
                     % (_MARGIN_L + plot_w // 2, _HEIGHT - 12, _escape(xlabel)))
    if ylabel:
        parts.append('<text x="14" y="%d" text-anchor="middle" '
                     'transform="rotate(-90 14 %d)">%s</text>'
                     % (_MARGIN_T + plot_h // 2, _MARGIN_T + plot_h // 2,
                        _escape(ylabel)))

    for i, (label, x, y) in enumerate(series):
        x = np.asarray(x, float)
        y = np.asarray(y, float)
        color = _COLORS[i % len(_COLORS)]
        step = max(1, len(x) // 4000)   # cap polyline size
        pts = " ".join("%.1f,%.1f" % (sx(a), sy(b))
                       for a, b in zip(x[::step], y[::step]))
        parts.append('<polyline points="%s" fill="none" stroke="%s" '
                     'stroke-width="1.2"/>' % (pts, color))
        ly = _MARGIN_T + 16 + 16 * i
        parts.append('<line x1="%d" y1="%d" x2="%d" y2="%d" stroke="%s" '
                     'stroke-width="2"/>'
                     % (_MARGIN_L + 8, ly - 4, _MARGIN_L + 28, ly - 4, color))
        parts.append('<text x="%d" y="%d">%s</text>'
                     % (_MARGIN_L + 34, ly, _escape(label)))

    parts.append("</svg>")
    Path(path).write_text("\n".join(parts))


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;"))
