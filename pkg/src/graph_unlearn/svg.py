"""Minimal standalone SVG line charts, written directly with no display or
plotting dependency."""

from __future__ import annotations

import math

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 55


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    span = hi - lo
    step = 10 ** math.floor(math.log10(span / count))
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= count:
            step *= mult
            break
    start = math.ceil(lo / step) * step
    out = []
    t = start
    while t <= hi + 1e-12 * span:
        out.append(round(t, 12))
        t += step
    return out


def line_chart(series: dict[str, list[tuple[float, float]]], path,
               title: str = "", xlabel: str = "", ylabel: str = "",
               logy: bool = False) -> None:
    """Write a line chart of one or more named (x, y) series to ``path``."""
    points = [(x, y) for pts in series.values() for x, y in pts]
    if not points:
        raise ValueError("no data to plot")
    xs = [p[0] for p in points]
    ys = [math.log10(max(p[1], 1e-300)) if logy else p[1] for p in points]
    xlo, xhi = min(xs), max(xs)
    ylo, yhi = min(ys), max(ys)
    if xhi == xlo:
        xhi = xlo + 1.0
    if yhi == ylo:
        yhi = ylo + 1.0
    pad = 0.05 * (yhi - ylo)
    ylo, yhi = ylo - pad, yhi + pad

    def px(x: float) -> float:
        return _ML + (x - xlo) / (xhi - xlo) * (_W - _ML - _MR)

    def py(y: float) -> float:
        if logy:
            y = math.log10(max(y, 1e-300))
        return _H - _MB - (y - ylo) / (yhi - ylo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="24" text-anchor="middle" '
        f'font-family="sans-serif" font-size="15">{title}</text>',
    ]
    # axes
    parts.append(f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" '
                 f'y2="{_H - _MB}" stroke="black"/>')
    parts.append(f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" '
                 'stroke="black"/>')
    for t in _ticks(xlo, xhi):
        x = px(t)
        parts.append(f'<line x1="{x}" y1="{_H - _MB}" x2="{x}" '
                     f'y2="{_H - _MB + 5}" stroke="black"/>')
        parts.append(f'<text x="{x}" y="{_H - _MB + 20}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{t:g}</text>')
    for t in _ticks(ylo, yhi):
        y = _H - _MB - (t - ylo) / (yhi - ylo) * (_H - _MT - _MB)
        label = f"1e{t:g}" if logy else f"{t:g}"
        parts.append(f'<line x1="{_ML - 5}" y1="{y}" x2="{_ML}" y2="{y}" '
                     'stroke="black"/>')
        parts.append(f'<text x="{_ML - 8}" y="{y + 4}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{label}</text>')
    parts.append(f'<text x="{(_W + _ML) / 2}" y="{_H - 12}" '
                 'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13">{xlabel}</text>')
    parts.append(f'<text x="18" y="{(_H - _MB + _MT) / 2}" '
                 'text-anchor="middle" font-family="sans-serif" '
                 f'font-size="13" transform="rotate(-90 18 '
                 f'{(_H - _MB + _MT) / 2})">{ylabel}</text>')

    for i, (name, pts) in enumerate(series.items()):
        color = _COLORS[i % len(_COLORS)]
        coords = " ".join(f"{px(x):.2f},{py(y):.2f}"
                          for x, y in sorted(pts))
        parts.append(f'<polyline points="{coords}" fill="none" '
                     f'stroke="{color}" stroke-width="2"/>')
        for x, y in pts:
            parts.append(f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="3" '
                         f'fill="{color}"/>')
        ly = _MT + 16 * i
        parts.append(f'<line x1="{_W - _MR - 130}" y1="{ly}" '
                     f'x2="{_W - _MR - 105}" y2="{ly}" stroke="{color}" '
                     'stroke-width="2"/>')
        parts.append(f'<text x="{_W - _MR - 100}" y="{ly + 4}" '
                     f'font-family="sans-serif" font-size="12">{name}</text>')
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
