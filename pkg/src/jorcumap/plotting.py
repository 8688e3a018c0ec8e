"""Dependency-free SVG scatter plots of 2-D embeddings."""

from __future__ import annotations

import numpy as np

from .embed import Embedding

# categorical palette (tab10 hex values)
PALETTE = (
    "#1f77b4",
    "#ff7f0e",
    "#2ca02c",
    "#d62728",
    "#9467bd",
    "#8c564b",
    "#e377c2",
    "#7f7f7f",
    "#bcbd22",
    "#17becf",
)
CANVAS = 640
MARGIN_FRACTION = 0.05
POINT_RADIUS = 2.5


def plot_scatter(emb: Embedding, labels=None, path=None) -> str:
    """Render one circle per embedding point into an SVG string.

    Colors cycle through a fixed categorical palette by label; output bytes
    are deterministic for identical input. When ``path`` is given the SVG is
    also written there.
    """
    if emb.dim != 2:
        raise ValueError("scatter plots need a 2-D embedding")
    coords = emb.coords
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    span = np.maximum(hi - lo, 1e-12)
    margin = span * MARGIN_FRACTION
    lo = lo - margin
    span = span + 2 * margin
    scale = (CANVAS - 1) / span.max()

    if labels is not None:
        labels = np.asarray(labels, dtype=np.int64)
        if labels.shape != (emb.n,):
            raise ValueError("labels must match embedding rows")

    lines = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{CANVAS}" height="{CANVAS}" '
        f'viewBox="0 0 {CANVAS} {CANVAS}">',
        f'<rect width="{CANVAS}" height="{CANVAS}" fill="white"/>',
    ]
    for r in range(emb.n):
        cx = (coords[r, 0] - lo[0]) * scale
        cy = CANVAS - 1 - (coords[r, 1] - lo[1]) * scale  # flip y for SVG
        color = PALETTE[int(labels[r]) % len(PALETTE)] if labels is not None else PALETTE[0]
        lines.append(
            f'<circle cx="{cx:.3f}" cy="{cy:.3f}" r="{POINT_RADIUS}" '
            f'fill="{color}" fill-opacity="0.8"/>'
        )
    lines.append("</svg>")
    svg = "\n".join(lines) + "\n"
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(svg)
    return svg
