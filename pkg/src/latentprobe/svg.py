"""Hand-built SVG scatter plots with feature-gradient arrows.

Pure string assembly with fixed two-decimal coordinate formatting, so the
same inputs always produce the same bytes and tests can diff documents.
"""

from __future__ import annotations

import numpy as np

from .dimred import Reduced2D
from .gradients import GradientField

PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728",
    "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
)
PANEL_W = 820
PANEL_H = 640
PLOT_X0 = 55
PLOT_Y0 = 45
PLOT_W = 560
PLOT_H = 520
LEGEND_X = 650
ARROW_FRACTION = 0.25
HEAD_LEN = 9.0
HEAD_ANGLE = np.pi / 7.0
POINT_R = 2.2


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def _esc(text: str) -> str:
    return (str(text).replace("&", "&amp;").replace("<", "&lt;")
            .replace(">", "&gt;").replace('"', "&quot;"))


def style_palette(styles: list[str]) -> dict[str, str]:
    """Fixed color per style, assigned in sorted order, cycling past 8."""
    uniq = sorted(set(styles))
    return {s: PALETTE[i % len(PALETTE)] for i, s in enumerate(uniq)}


def render_svg(reduced: Reduced2D, field: GradientField | None,
               styles: list[str], title: str | None = None) -> str:
    """One scatter panel with gradient arrows out of the cloud centroid.

    Points are colored by style with a legend; each arrow is a single path
    (shaft plus head) whose length is APCC times a quarter of the plot
    diagonal, labeled with its feature name at the tip. Low-confidence
    arrows are dashed. A provenance footer pins reducer, seed, and params.
    """
    coords = reduced.coords
    n = len(coords)
    if len(styles) != n:
        from .errors import ValidationError

        raise ValidationError(f"{n} points but {len(styles)} style labels")

    xmid = float(coords[:, 0].min() + coords[:, 0].max()) / 2.0
    ymid = float(coords[:, 1].min() + coords[:, 1].max()) / 2.0
    xrange = float(coords[:, 0].max() - coords[:, 0].min())
    yrange = float(coords[:, 1].max() - coords[:, 1].min())
    # uniform scale keeps angles honest; y flips into screen coordinates
    scale = min(
        PLOT_W / xrange if xrange > 0 else np.inf,
        PLOT_H / yrange if yrange > 0 else np.inf,
    )
    if not np.isfinite(scale):
        scale = 1.0
    scale *= 0.92
    cx0 = PLOT_X0 + PLOT_W / 2.0
    cy0 = PLOT_Y0 + PLOT_H / 2.0

    def sx(x: float) -> float:
        return cx0 + scale * (x - xmid)

    def sy(y: float) -> float:
        return cy0 - scale * (y - ymid)

    colors = style_palette(styles)
    header = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{PANEL_W}" '
        f'height="{PANEL_H}" viewBox="0 0 {PANEL_W} {PANEL_H}">'
    )
    parts = [header,
             f'<rect x="0" y="0" width="{PANEL_W}" height="{PANEL_H}" fill="#ffffff"/>']
    shown_title = title if title is not None else f"{field.task if field else ''} / {reduced.reducer}".strip(" /")
    parts.append(
        f'<text x="{PLOT_X0}" y="28" font-family="sans-serif" font-size="16" '
        f'fill="#222222">{_esc(shown_title)}</text>'
    )
    parts.append(
        f'<rect x="{PLOT_X0}" y="{PLOT_Y0}" width="{PLOT_W}" height="{PLOT_H}" '
        f'fill="none" stroke="#cccccc" stroke-width="1"/>'
    )
    for i in range(n):
        parts.append(
            f'<circle cx="{_fmt(sx(coords[i, 0]))}" cy="{_fmt(sy(coords[i, 1]))}" '
            f'r="{POINT_R}" fill="{colors[styles[i]]}" fill-opacity="0.55"/>'
        )

    if field is not None and len(field):
        cgx = float(coords[:, 0].mean())
        cgy = float(coords[:, 1].mean())
        ax0, ay0 = sx(cgx), sy(cgy)
        diag = float(np.hypot(PLOT_W, PLOT_H))
        for arrow in field.arrows:
            g = arrow.gradient
            norm = float(np.hypot(g[0], g[1]))
            if norm <= 1e-12:
                continue
            ux, uy = g[0] / norm, g[1] / norm
            # screen direction: y component flips
            dxs, dys = ux, -uy
            length = arrow.apcc * ARROW_FRACTION * diag
            tipx, tipy = ax0 + length * dxs, ay0 + length * dys
            theta = np.arctan2(dys, dxs)
            h1x = tipx - HEAD_LEN * np.cos(theta - HEAD_ANGLE)
            h1y = tipy - HEAD_LEN * np.sin(theta - HEAD_ANGLE)
            h2x = tipx - HEAD_LEN * np.cos(theta + HEAD_ANGLE)
            h2y = tipy - HEAD_LEN * np.sin(theta + HEAD_ANGLE)
            dash = ' stroke-dasharray="5,4"' if arrow.low_confidence else ""
            d = (
                f"M {_fmt(ax0)} {_fmt(ay0)} L {_fmt(tipx)} {_fmt(tipy)} "
                f"L {_fmt(h1x)} {_fmt(h1y)} M {_fmt(tipx)} {_fmt(tipy)} "
                f"L {_fmt(h2x)} {_fmt(h2y)}"
            )
            parts.append(
                f'<path d="{d}" fill="none" stroke="#333333" '
                f'stroke-width="1.6"{dash}/>'
            )
            lx = tipx + 6.0 * dxs
            ly = tipy + 6.0 * dys
            anchor = "start" if dxs >= 0 else "end"
            parts.append(
                f'<text x="{_fmt(lx)}" y="{_fmt(ly)}" font-family="sans-serif" '
                f'font-size="10" fill="#333333" text-anchor="{anchor}">'
                f"{_esc(arrow.feature)}</text>"
            )

    ly = PLOT_Y0 + 8
    for s in sorted(colors):
        parts.append(
            f'<circle cx="{LEGEND_X}" cy="{ly}" r="4" fill="{colors[s]}"/>'
        )
        parts.append(
            f'<text x="{LEGEND_X + 10}" y="{ly + 4}" font-family="sans-serif" '
            f'font-size="11" fill="#222222">{_esc(s)}</text>'
        )
        ly += 18

    prov = (
        f"reducer={reduced.reducer} seed={reduced.seed} n={n} "
        + " ".join(f"{k}={_param_str(v)}" for k, v in sorted(reduced.params.items()))
    )
    parts.append(
        f'<text x="{PLOT_X0}" y="{PANEL_H - 12}" font-family="monospace" '
        f'font-size="9" fill="#777777">{_esc(prov.strip())}</text>'
    )
    parts.append("</svg>")
    return "\n".join(parts)


def _param_str(v) -> str:
    if isinstance(v, float):
        return f"{v:.6g}"
    return str(v)


def contact_sheet(panels: list[str], columns: int = 3) -> str:
    """Tiles finished panels into one grid document."""
    if not panels:
        columns = 1
    rows = max(1, (len(panels) + columns - 1) // columns)
    width = PANEL_W * min(max(len(panels), 1), columns)
    height = PANEL_H * rows
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">'
    ]
    for i, panel in enumerate(panels):
        x = (i % columns) * PANEL_W
        y = (i // columns) * PANEL_H
        inner = panel.replace(
            '<svg xmlns="http://www.w3.org/2000/svg" ',
            f'<svg x="{x}" y="{y}" ', 1,
        )
        parts.append(inner)
    parts.append("</svg>")
    return "\n".join(parts)
