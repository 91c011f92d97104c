"""Minimal self-contained SVG scatter plots."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

COLORS = {"correct": "#1f77b4", "incorrect": "#d62728", "ood": "#2ca02c", "adversarial": "#9467bd"}
ORDER = ("correct", "incorrect", "ood", "adversarial")


def _ticks(lo: float, hi: float, n: int = 5) -> np.ndarray:
    return np.linspace(lo, hi, n)


def _range(v):
    v = np.asarray(v, dtype=float)
    lo, hi = (float(v.min()), float(v.max())) if v.size else (0.0, 1.0)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.05 * (hi - lo)
    return lo - pad, hi + pad


def scatter_svg(x, y, categories, title: str = "", xlabel: str = "", ylabel: str = "",
                width: int = 640, height: int = 480) -> str:
    """One dot per point, coloured by category, with axes, ticks and a legend.

    Coordinates are printed with fixed precision so identical inputs give
    identical bytes.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    cats = list(categories)
    if not (x.size == y.size == len(cats)):
        raise ValueError("x, y and categories must share one length")
    left, right, top, bottom = 70, 150, 40, 60
    pw, ph = width - left - right, height - top - bottom
    x0, x1 = _range(x)
    y0, y1 = _range(y)
    sx = lambda v: left + (v - x0) / (x1 - x0) * pw
    sy = lambda v: top + ph - (v - y0) / (y1 - y0) * ph
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left + pw / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
           f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for t in _ticks(x0, x1):
        px = sx(t)
        out.append(f'<line x1="{px:.2f}" y1="{top + ph}" x2="{px:.2f}" y2="{top + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{px:.2f}" y="{top + ph + 18}" text-anchor="middle">{t:.3g}</text>')
    for t in _ticks(y0, y1):
        py = sy(t)
        out.append(f'<line x1="{left - 5}" y1="{py:.2f}" x2="{left}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py + 4:.2f}" text-anchor="end">{t:.3g}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 15}" text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(18 {top + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')
    present = [c for c in ORDER if c in cats] + sorted({c for c in cats if c not in COLORS})
    for c in present:
        color = COLORS.get(c, "#7f7f7f")
        out.append(f'<g fill="{color}" fill-opacity="0.7">')
        for xi, yi, ci in zip(x, y, cats):
            if ci == c:
                out.append(f'<circle cx="{sx(xi):.2f}" cy="{sy(yi):.2f}" r="3"/>')
        out.append("</g>")
    for i, c in enumerate(present):
        ly = top + 10 + 18 * i
        out.append(f'<circle cx="{left + pw + 20}" cy="{ly}" r="4" fill="{COLORS.get(c, "#7f7f7f")}"/>')
        out.append(f'<text x="{left + pw + 30}" y="{ly + 4}">{escape(c)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
