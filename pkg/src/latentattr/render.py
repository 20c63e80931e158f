"""Byte-deterministic SVG rendering of heat maps."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

LIGHT = (247, 251, 255)
DARK = (8, 48, 107)
CELL = 18


def _color(frac: float) -> str:
    rgb = [round(lo + (hi - lo) * frac) for lo, hi in zip(LIGHT, DARK)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def render_heatmap_svg(hm, title: str | None = None) -> str:
    counts = np.asarray(hm.counts)
    if counts.size == 0:
        raise ValueError("cannot render an empty heat map")
    R, D = counts.shape
    top = 10 * max(len(str(c)) for c in hm.col_labels) * 0.6 + 30 if hm.col_labels else 30
    left = 70
    width = int(left + D * CELL + 20)
    height = int(top + R * CELL + 60)
    peak = counts.max()
    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="10">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
    ]
    for j, name in enumerate(hm.col_labels):
        x = left + j * CELL + CELL / 2
        lines.append(f'<text x="{x:.1f}" y="{top - 4:.1f}" transform="rotate(-60 {x:.1f} {top - 4:.1f})">'
                     f'{escape(str(name))}</text>')
    for i, (s, n) in enumerate(hm.row_labels):
        y = top + i * CELL + CELL * 0.7
        lines.append(f'<text x="{left - 4}" y="{y:.1f}" text-anchor="end">z{s}(t{n})</text>')
    for i in range(R):
        for j in range(D):
            frac = counts[i, j] / peak if peak > 0 else 0.0
            lines.append(f'<rect class="cell" x="{left + j * CELL}" y="{top + i * CELL:.1f}" '
                         f'width="{CELL}" height="{CELL}" fill="{_color(frac)}">'
                         f'<title>{int(counts[i, j])}</title></rect>')
    legend = title or f"{hm.direction} impact; max count {int(peak)}"
    params = ", ".join(f"{k}={v}" for k, v in sorted(hm.params.items()))
    if hm.n_baselines:
        params = f"{params}, n_baselines={hm.n_baselines}" if params else f"n_baselines={hm.n_baselines}"
    y0 = top + R * CELL + 20
    lines.append(f'<text x="{left}" y="{y0:.1f}">{escape(legend)}</text>')
    if params:
        lines.append(f'<text x="{left}" y="{y0 + 14:.1f}">{escape(params)}</text>')
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
