"""Static SVG scatter plots of clusterings."""

from __future__ import annotations

from html import escape

import numpy as np

# fixed palette indexed by cluster id; ids past the end wrap around
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#17becf", "#bcbd22", "#393b79",
    "#637939", "#8c6d31", "#843c39", "#7b4173", "#3182bd",
)
NOISE_COLOR = "#b0b0b0"


def color_for(label: int) -> str:
    return NOISE_COLOR if label < 0 else PALETTE[label % len(PALETTE)]


def scatter_svg(points, labels, title: str = "", size: int = 480, margin: int = 24, radius: float = 1.6) -> str:
    """Render points coloured by label as an SVG 1.1 document.

    Noise is drawn first, in grey, so clusters stay visible on top of it.
    Output depends only on the inputs.
    """
    pts = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    lo = pts.min(axis=0)
    span = pts.max(axis=0) - lo
    span[span == 0] = 1.0
    scale = (size - 2 * margin) / span.max()
    xs = margin + (pts[:, 0] - lo[0]) * scale
    ys = size - margin - (pts[:, 1] - lo[1]) * scale

    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{margin}" y="{margin - 8}" font-family="sans-serif" font-size="12">{escape(title)}</text>')
    order = np.argsort(labels >= 0, kind="stable")
    for lab in [-1] + sorted(set(labels[labels >= 0].tolist())):
        idx = order[labels[order] == lab]
        if idx.size == 0:
            continue
        out.append(f'<g fill="{color_for(lab)}" stroke="none">')
        for i in idx:
            out.append(f'<circle cx="{xs[i]:.2f}" cy="{ys[i]:.2f}" r="{radius}"/>')
        out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
