"""Deterministic SVG emission: Smith-chart match trajectory and layout
rendering. No plotting library — the files are assembled from fixed-format
strings so identical inputs produce byte-identical output.
"""

from __future__ import annotations

import math

from .placer.legal import placed_rect

SMITH_SIZE = 520.0
SMITH_R = 230.0          # unit-circle radius in px
TARGET_RADIUS = 0.316    # |Gamma| circle corresponding to -10 dB

KIND_FILL = {
    "cascode_mos": "#d8905f",
    "bias_mos": "#e0b080",
    "resistor": "#b0b0b0",
    "capacitor": "#7fa8d0",
    "spiral": "#8fbf8f",
    "tline": "#a8d0a0",
    "cpw": "#c0dca8",
    "pad": "#e8d060",
    "decap": "#90c8c8",
}

LAYER_COLOR = {
    "M1": "#606060", "M2": "#806040", "M3": "#a05050",
    "M4": "#3060c0", "M5": "#c03060", "M6": "#30a060",
    "M7": "#c08020", "M8": "#8040c0", "M9": "#c04040",
}


def _f(x: float) -> str:
    """Fixed-precision coordinate formatting for byte-stable output."""
    return f"{x:.3f}"


def _smith_xy(gamma: complex) -> tuple:
    cx = SMITH_SIZE / 2.0
    return (cx + gamma.real * SMITH_R, cx - gamma.imag * SMITH_R)


def smith_chart_svg(trajectory, labels=("A", "B", "C"),
                    target_radius: float = TARGET_RADIUS) -> str:
    """Smith chart with the input-match trajectory.

    trajectory: reflection coefficients in visiting order (bare device ->
    after gate passive -> after input line). The chart shows the unit
    circle, a dashed circle at the target reflection radius, constant-
    resistance guide circles, and the labeled trajectory.
    """
    cx = SMITH_SIZE / 2.0
    out = []
    out.append(f'<svg xmlns="http://www.w3.org/2000/svg" '
               f'width="{_f(SMITH_SIZE)}" height="{_f(SMITH_SIZE)}" '
               f'viewBox="0 0 {_f(SMITH_SIZE)} {_f(SMITH_SIZE)}">')
    out.append(f'<rect width="{_f(SMITH_SIZE)}" height="{_f(SMITH_SIZE)}" '
               f'fill="white"/>')
    out.append(f'<circle cx="{_f(cx)}" cy="{_f(cx)}" r="{_f(SMITH_R)}" '
               f'fill="none" stroke="black" stroke-width="1.5"/>')
    # constant-resistance circles r = 0.5, 1, 2 (normalized)
    for rn in (0.5, 1.0, 2.0):
        c = rn / (1.0 + rn)
        rad = 1.0 / (1.0 + rn)
        out.append(f'<circle cx="{_f(cx + c * SMITH_R)}" cy="{_f(cx)}" '
                   f'r="{_f(rad * SMITH_R)}" fill="none" '
                   f'stroke="#c8c8c8" stroke-width="0.8"/>')
    # real axis
    out.append(f'<line x1="{_f(cx - SMITH_R)}" y1="{_f(cx)}" '
               f'x2="{_f(cx + SMITH_R)}" y2="{_f(cx)}" '
               f'stroke="#c8c8c8" stroke-width="0.8"/>')
    # target reflection circle
    out.append(f'<circle cx="{_f(cx)}" cy="{_f(cx)}" '
               f'r="{_f(target_radius * SMITH_R)}" fill="none" '
               f'stroke="#d04040" stroke-width="1.2" '
               f'stroke-dasharray="6 4"/>')

    pts = [_smith_xy(g) for g in trajectory]
    if len(pts) >= 2:
        path = " ".join(f"{_f(x)},{_f(y)}" for x, y in pts)
        out.append(f'<polyline points="{path}" fill="none" '
                   f'stroke="#2060c0" stroke-width="2"/>')
    for (x, y), label in zip(pts, labels):
        out.append(f'<circle cx="{_f(x)}" cy="{_f(y)}" r="5" '
                   f'fill="#2060c0"/>')
        out.append(f'<text x="{_f(x + 8)}" y="{_f(y - 8)}" '
                   f'font-family="sans-serif" font-size="16">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def layout_svg(blocks, solution, routed=None, mesh=None,
               include_pdn: bool = True, margin: float = 10.0,
               scale: float = 2.0) -> str:
    """Layout rendering: blocks by kind, wires/straps color-coded by layer.

    The SVG bounding box is the chip extent plus `margin` on every side
    (layout micrometres times `scale` pixels).
    """
    by_id = {b.id: b for b in blocks}
    ext_x = ext_y = 0.0
    rects = []
    for bid in sorted(solution.positions):
        r = placed_rect(by_id[bid], *solution.positions[bid])
        rects.append((bid, by_id[bid].kind, r))
        ext_x, ext_y = max(ext_x, r[2]), max(ext_y, r[3])
    if routed is not None:
        ext_x, ext_y = max(ext_x, routed.extent[0]), \
            max(ext_y, routed.extent[1])

    w = (ext_x + 2 * margin) * scale
    h = (ext_y + 2 * margin) * scale

    def x(v):
        return _f((v + margin) * scale)

    def y(v):
        return _f(h - (v + margin) * scale)   # flip: +y up

    def rect(r, fill, opacity="1.0", stroke="none"):
        return (f'<rect x="{x(r[0])}" y="{y(r[3])}" '
                f'width="{_f((r[2] - r[0]) * scale)}" '
                f'height="{_f((r[3] - r[1]) * scale)}" '
                f'fill="{fill}" fill-opacity="{opacity}" '
                f'stroke="{stroke}" stroke-width="0.5"/>')

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(w)}" '
           f'height="{_f(h)}" viewBox="0 0 {_f(w)} {_f(h)}">',
           f'<rect width="{_f(w)}" height="{_f(h)}" fill="#f8f8f4"/>',
           rect((0.0, 0.0, ext_x, ext_y), "#ffffff", stroke="#404040")]

    if mesh is not None and include_pdn:
        for s in mesh.straps:
            color = LAYER_COLOR.get(s.layer, "#808080")
            out.append(rect((s.x0, s.y0, s.x1, s.y1), color, "0.25"))
        for d in mesh.decaps:
            out.append(rect((d.x, d.y, d.x + d.size, d.y + d.size),
                            KIND_FILL["decap"], "0.5"))

    for bid, kind, r in rects:
        out.append(rect(r, KIND_FILL.get(kind, "#cccccc"), "0.9",
                        "#404040"))
        cxp = 0.5 * (r[0] + r[2])
        cyp = 0.5 * (r[1] + r[3])
        out.append(f'<text x="{x(cxp)}" y="{y(cyp)}" '
                   f'font-family="sans-serif" '
                   f'font-size="{_f(4 * scale)}" text-anchor="middle">'
                   f'{bid}</text>')

    if routed is not None:
        for name in sorted(routed.trees):
            tree = routed.trees[name]
            for seg in tree.segments:
                color = LAYER_COLOR.get(seg.layer, "#202020")
                out.append(rect((seg.x0, seg.y0, seg.x1, seg.y1),
                                color, "0.85"))
            for via in tree.vias:
                hs = 0.5 * via.size
                out.append(rect((via.x - hs, via.y - hs,
                                 via.x + hs, via.y + hs),
                                "#101010", "0.9"))

    out.append("</svg>")
    return "\n".join(out) + "\n"


def sweep_plot_svg(freqs, values_db, f0: float, title: str,
                   width: float = 640.0, height: float = 400.0) -> str:
    """Simple |S| vs frequency line plot (dB against log f)."""
    lo, hi = math.log10(freqs[0]), math.log10(freqs[-1])
    vmin = min(values_db) - 1.0
    vmax = max(values_db) + 1.0
    pad = 50.0

    def px(f):
        return pad + (math.log10(f) - lo) / (hi - lo) * (width - 2 * pad)

    def py(v):
        return height - pad - (v - vmin) / (vmax - vmin) \
            * (height - 2 * pad)

    pts = " ".join(f"{_f(px(f))},{_f(py(v))}"
                   for f, v in zip(freqs, values_db))
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{_f(width)}" '
           f'height="{_f(height)}" viewBox="0 0 {_f(width)} {_f(height)}">',
           f'<rect width="{_f(width)}" height="{_f(height)}" fill="white"/>',
           f'<rect x="{_f(pad)}" y="{_f(pad)}" '
           f'width="{_f(width - 2 * pad)}" height="{_f(height - 2 * pad)}" '
           f'fill="none" stroke="#404040"/>',
           f'<line x1="{_f(px(f0))}" y1="{_f(pad)}" x2="{_f(px(f0))}" '
           f'y2="{_f(height - pad)}" stroke="#d04040" '
           f'stroke-dasharray="4 4"/>',
           f'<polyline points="{pts}" fill="none" stroke="#2060c0" '
           f'stroke-width="1.5"/>',
           f'<text x="{_f(width / 2)}" y="{_f(pad - 14)}" '
           f'font-family="sans-serif" font-size="16" '
           f'text-anchor="middle">{title}</text>',
           "</svg>"]
    return "\n".join(out) + "\n"
