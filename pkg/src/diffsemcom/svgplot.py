"""Deterministic standalone SVG line charts of result rows.

Hand-written SVG 1.1 so identical inputs give identical bytes.  One series
per (system, split, depth-mode) configuration; y is the median over seeds of
the chosen metric, x is the SNR in dB.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParameterError

_PLOTTABLE = (
    "mse", "nmse", "sw2", "mmd2", "sigma_eps2", "sigma_n2", "sigma_tot2",
    "gamma_mean", "t_b_resolved",
)
_PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd",
    "#ff7f0e", "#8c564b", "#e377c2", "#7f7f7f",
)


@dataclass(frozen=True)
class PlotSpec:
    metric: str
    title: str = ""
    width: int = 640
    height: int = 420


def _series_key(row):
    return (row.system, row.t_f1, row.t_f2, row.t_b_mode)


def _series_label(key):
    system, t_f1, t_f2, t_b_mode = key
    return f"{system} ({t_f1},{t_f2}) t_b={t_b_mode}"


def emit_svg_plot(rows, spec: PlotSpec) -> str:
    """Render rows as an SVG line chart; returns the document text."""
    if isinstance(spec, str):
        spec = PlotSpec(metric=spec)
    if spec.metric not in _PLOTTABLE:
        raise ParameterError(
            f"unknown metric {spec.metric!r}; expected one of {_PLOTTABLE}"
        )
    rows = list(rows)
    if not rows:
        raise ParameterError("no rows to plot")

    series: dict[tuple, dict[float, list[float]]] = {}
    for row in rows:
        bucket = series.setdefault(_series_key(row), {})
        bucket.setdefault(float(row.snr_db), []).append(float(getattr(row, spec.metric)))

    points = {
        key: sorted((x, float(np.median(ys))) for x, ys in buckets.items())
        for key, buckets in sorted(series.items())
    }

    xs = [x for pts in points.values() for x, _ in pts]
    ys = [y for pts in points.values() for _, y in pts]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys), max(ys)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1.0, x_hi + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo, y_hi = y_lo - pad, y_hi + pad

    w, h = spec.width, spec.height
    ml, mr, mt, mb = 70, 20, 30, 45

    def sx(x):
        return ml + (x - x_lo) / (x_hi - x_lo) * (w - ml - mr)

    def sy(y):
        return h - mb - (y - y_lo) / (y_hi - y_lo) * (h - mt - mb)

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
        f'<line x1="{ml}" y1="{h - mb}" x2="{w - mr}" y2="{h - mb}" stroke="black"/>',
        f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{h - mb}" stroke="black"/>',
    ]
    title = spec.title or f"{spec.metric} vs snr_db"
    out.append(
        f'<text x="{w / 2:.1f}" y="18" font-family="sans-serif" font-size="13" '
        f'text-anchor="middle">{title}</text>'
    )
    for x in sorted(set(xs)):
        px = sx(x)
        out.append(f'<line x1="{px:.2f}" y1="{h - mb}" x2="{px:.2f}" y2="{h - mb + 4}" stroke="black"/>')
        out.append(
            f'<text x="{px:.2f}" y="{h - mb + 16}" font-family="sans-serif" '
            f'font-size="10" text-anchor="middle">{x:g}</text>'
        )
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        y = y_lo + frac * (y_hi - y_lo)
        py = sy(y)
        out.append(f'<line x1="{ml - 4}" y1="{py:.2f}" x2="{ml}" y2="{py:.2f}" stroke="black"/>')
        out.append(
            f'<text x="{ml - 7}" y="{py + 3:.2f}" font-family="sans-serif" '
            f'font-size="10" text-anchor="end">{y:.4g}</text>'
        )
    out.append(
        f'<text x="{(ml + w - mr) / 2:.1f}" y="{h - 8}" font-family="sans-serif" '
        f'font-size="11" text-anchor="middle">snr_db</text>'
    )
    out.append(
        f'<text x="16" y="{(mt + h - mb) / 2:.1f}" font-family="sans-serif" font-size="11" '
        f'text-anchor="middle" transform="rotate(-90 16 {(mt + h - mb) / 2:.1f})">{spec.metric}</text>'
    )

    for i, (key, pts) in enumerate(points.items()):
        color = _PALETTE[i % len(_PALETTE)]
        path = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        for x, y in pts:
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="3" fill="{color}"/>')
        ly = mt + 14 * (i + 1)
        out.append(f'<line x1="{w - mr - 150}" y1="{ly}" x2="{w - mr - 132}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(
            f'<text x="{w - mr - 128}" y="{ly + 3}" font-family="sans-serif" '
            f'font-size="10">{_series_label(key)}</text>'
        )
    out.append("</svg>")
    return "\n".join(out) + "\n"
