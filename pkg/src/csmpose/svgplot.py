"""Minimal dependency-free SVG line plots for run reports."""
from __future__ import annotations

import math
from pathlib import Path

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def polyline_plot(
    path,
    series: dict[str, list[float]],
    *,
    title: str = "",
    x_label: str = "frame",
    y_label: str = "",
    hlines: tuple[float, ...] = (),
    width: int = 720,
    height: int = 360,
) -> None:
    """Write an SVG with one polyline per named series.

    NaN samples break a series into separate polyline segments. ``hlines``
    draws dashed horizontal reference lines at fixed y values.
    """
    ml, mr, mt, mb = 56, 16, 28, 40
    pw, ph = width - ml - mr, height - mt - mb
    xs_max = max((len(v) for v in series.values()), default=1) - 1
    xs_max = max(xs_max, 1)
    finite = [v for vals in series.values() for v in vals if math.isfinite(v)]
    finite.extend(hlines)
    if not finite:
        finite = [0.0, 1.0]
    lo, hi = min(finite), max(finite)
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 0.05 * (hi - lo)
    lo, hi = lo - pad, hi + pad

    def px(i: float) -> float:
        return ml + pw * i / xs_max

    def py(v: float) -> float:
        return mt + ph * (hi - v) / (hi - lo)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<rect x="{ml}" y="{mt}" width="{pw}" height="{ph}" fill="none" '
        'stroke="#444" stroke-width="1"/>',
    ]
    if title:
        parts.append(
            f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" '
            f'font-family="sans-serif" font-size="14">{title}</text>'
        )
    parts.append(
        f'<text x="{ml + pw / 2:.0f}" y="{height - 8}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>'
    )
    if y_label:
        parts.append(
            f'<text x="14" y="{mt + ph / 2:.0f}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="12" '
            f'transform="rotate(-90 14 {mt + ph / 2:.0f})">{y_label}</text>'
        )
    for v in (lo + pad, hi - pad):
        parts.append(
            f'<text x="{ml - 6}" y="{py(v) + 4:.0f}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">{v:.3g}</text>'
        )
    for v in hlines:
        y = _fmt(py(v))
        parts.append(
            f'<line x1="{ml}" y1="{y}" x2="{ml + pw}" y2="{y}" '
            'stroke="#888" stroke-width="1" stroke-dasharray="6 4"/>'
        )
    for idx, (name, vals) in enumerate(series.items()):
        color = _PALETTE[idx % len(_PALETTE)]
        run: list[str] = []
        chunks: list[list[str]] = []
        for i, v in enumerate(vals):
            if math.isfinite(v):
                run.append(f"{_fmt(px(i))},{_fmt(py(v))}")
            elif run:
                chunks.append(run)
                run = []
        if run:
            chunks.append(run)
        for chunk in chunks:
            if len(chunk) == 1:
                x, y = chunk[0].split(",")
                parts.append(f'<circle cx="{x}" cy="{y}" r="2" fill="{color}"/>')
            else:
                parts.append(
                    f'<polyline points="{" ".join(chunk)}" fill="none" '
                    f'stroke="{color}" stroke-width="1.5"/>'
                )
        ly = mt + 16 + 16 * idx
        parts.append(
            f'<line x1="{ml + pw - 130}" y1="{ly - 4}" x2="{ml + pw - 108}" '
            f'y2="{ly - 4}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{ml + pw - 102}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{name}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
