"""Static log-log SVG of estimated probabilities against n."""

from __future__ import annotations

import math
from typing import Sequence
from xml.sax.saxutils import escape

WIDTH, HEIGHT, PAD = 640, 440, 60


def _series(rows: Sequence[dict]):
    pts = []
    for r in rows:
        pts.append({
            "n": float(r["n"]),
            "p_lo": float(r["p_lo"]), "lo_a": float(r["p_lo_ci_lo"]), "lo_b": float(r["p_lo_ci_hi"]),
            "p_hi": float(r["p_hi"]), "hi_a": float(r["p_hi_ci_lo"]), "hi_b": float(r["p_hi_ci_hi"]),
            "samples": int(r["samples"]),
        })
    pts.sort(key=lambda p: p["n"])
    return pts


def render(rows: Sequence[dict], dim: int = 2, title: str = "") -> str:
    """SVG document with ``p_lo``/``p_hi`` bands and dashed reference slopes
    ``-2 dim`` and ``-(dim - 1)``."""
    pts = _series(rows)
    if not pts:
        raise ValueError("nothing to plot")
    if any(p["n"] <= 0 for p in pts):
        raise ValueError("n must be positive on a log axis")
    floor = 1.0 / (10 * max(p["samples"] for p in pts))

    def ly(p):
        return math.log10(max(p, floor))

    xs = [math.log10(p["n"]) for p in pts]
    ys = [ly(v) for p in pts for v in (p["lo_a"], p["lo_b"], p["hi_a"], p["hi_b"], p["p_lo"], p["p_hi"])]
    x0, x1 = min(xs), max(xs)
    if x1 - x0 < 1e-9:
        x0, x1 = x0 - 0.5, x1 + 0.5
    y0, y1 = min(ys), max(ys)
    slopes = [-2 * dim, -(dim - 1)]
    anchor_x, anchor_y = xs[0], ly(pts[0]["p_lo"])
    for s in slopes:
        ys.append(anchor_y + s * (x1 - anchor_x))
    y0 = max(min(ys), math.log10(floor))
    y1 = max(y1, 0.0)
    if y1 - y0 < 1e-9:
        y0 -= 0.5
        y1 += 0.5

    def sx(x):
        return PAD + (x - x0) / (x1 - x0) * (WIDTH - 2 * PAD)

    def sy(y):
        y = min(max(y, y0), y1)
        return HEIGHT - PAD - (y - y0) / (y1 - y0) * (HEIGHT - 2 * PAD)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<title>{escape(title or "event probability vs n")}</title>',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line class="axis" x1="{PAD}" y1="{HEIGHT - PAD}" x2="{WIDTH - PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<line class="axis" x1="{PAD}" y1="{PAD}" x2="{PAD}" y2="{HEIGHT - PAD}" stroke="black"/>',
        f'<text x="{WIDTH / 2:.1f}" y="{HEIGHT - 15}" text-anchor="middle">log10 n</text>',
        f'<text x="15" y="{HEIGHT / 2:.1f}" transform="rotate(-90 15 {HEIGHT / 2:.1f})" '
        f'text-anchor="middle">log10 p</text>',
    ]
    for k in range(math.floor(y0), math.ceil(y1) + 1):
        if y0 <= k <= y1:
            out.append(f'<text class="tick" x="{PAD - 8}" y="{sy(k) + 4:.1f}" text-anchor="end">1e{k}</text>')
    for p, x in zip(pts, xs):
        out.append(f'<text class="tick" x="{sx(x):.1f}" y="{HEIGHT - PAD + 16}" '
                   f'text-anchor="middle">{p["n"]:g}</text>')

    def band(a, b, cls, colour):
        upper = " ".join(f"{sx(x):.2f},{sy(ly(p[b])):.2f}" for p, x in zip(pts, xs))
        lower = " ".join(f"{sx(x):.2f},{sy(ly(p[a])):.2f}" for p, x in reversed(list(zip(pts, xs))))
        return f'<polygon class="{cls}" points="{upper} {lower}" fill="{colour}" fill-opacity="0.25" stroke="none"/>'

    def line(key, cls, colour):
        coords = " ".join(f"{sx(x):.2f},{sy(ly(p[key])):.2f}" for p, x in zip(pts, xs))
        marks = "".join(f'<circle cx="{sx(x):.2f}" cy="{sy(ly(p[key])):.2f}" r="3" fill="{colour}"/>'
                        for p, x in zip(pts, xs))
        return f'<polyline class="{cls}" points="{coords}" fill="none" stroke="{colour}"/>' + marks

    out.append(band("hi_a", "hi_b", "band-p_hi", "#d95f02"))
    out.append(band("lo_a", "lo_b", "band-p_lo", "#1b9e77"))
    out.append(line("p_hi", "p_hi", "#d95f02"))
    out.append(line("p_lo", "p_lo", "#1b9e77"))
    for s in slopes:
        ya, yb = anchor_y, anchor_y + s * (x1 - anchor_x)
        out.append(
            f'<line class="guide" data-slope="{s}" x1="{sx(anchor_x):.2f}" y1="{sy(ya):.2f}" '
            f'x2="{sx(x1):.2f}" y2="{sy(yb):.2f}" stroke="gray" stroke-dasharray="6,4"/>'
        )
        out.append(f'<text class="guide-label" x="{sx(x1) - 4:.2f}" y="{sy(yb) - 6:.2f}" '
                   f'text-anchor="end">slope {s}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
