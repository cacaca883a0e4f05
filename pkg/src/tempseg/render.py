"""SVG figures: segmentation band charts and similarity heatmaps.

Band rows are emitted as <path> elements whose x boundaries are shared
literal coordinate strings, so each row partitions [0, width] exactly.
"""

from __future__ import annotations

import colorsys

import numpy as np

BAND_WIDTH = 960.0
BAND_HEIGHT = 26.0
BAND_GAP = 8.0
LABEL_GUTTER = 120.0

IGNORE_COLOR = "#b0b0b0"
NO_CLASS_COLOR = "#e0e0e0"


def class_palette(class_ids) -> dict[int, str]:
    """Deterministic class -> color hex mapping (golden-angle hues)."""
    palette = {}
    ordered = sorted(int(c) for c in class_ids)
    hue = 0.0
    for c in ordered:
        if c == -1:
            palette[c] = IGNORE_COLOR
            continue
        if c == -2:
            palette[c] = NO_CLASS_COLOR
            continue
        r, g, b = colorsys.hsv_to_rgb(hue % 1.0, 0.65, 0.88)
        palette[c] = f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"
        hue += 0.381966011
    return palette


def _runs(labels):
    runs = []
    start = 0
    for t in range(1, len(labels) + 1):
        if t == len(labels) or labels[t] != labels[start]:
            runs.append((int(labels[start]), start, t))
            start = t
    return runs


def render_segmentation_svg(gt, predictions, palette=None, names=None) -> str:
    """Stacked band rows (ground truth first) with a shared class legend."""
    gt = np.asarray(gt, dtype=np.int64)
    predictions = [np.asarray(p, dtype=np.int64) for p in predictions]
    for i, p in enumerate(predictions):
        if len(p) != len(gt):
            raise ValueError(
                f"prediction {i} has length {len(p)}, ground truth {len(gt)}")
    rows = [("ground truth", gt)]
    if names is None:
        names = [f"prediction {i + 1}" for i in range(len(predictions))]
    rows += list(zip(names, predictions))

    classes = sorted({int(v) for _, row in rows for v in row})
    if palette is None:
        palette = class_palette(classes)

    T = len(gt)
    boundaries = [f"{BAND_WIDTH * i / T:.4f}" for i in range(T + 1)]
    legend_height = 22.0 * len(classes)
    height = (BAND_HEIGHT + BAND_GAP) * len(rows) + BAND_GAP + legend_height
    total_width = LABEL_GUTTER + BAND_WIDTH + 20.0

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{total_width:.0f}" height="{height:.0f}" '
        f'viewBox="0 0 {total_width:.0f} {height:.0f}">',
        '<style>text{font-family:sans-serif;font-size:12px;}</style>',
    ]
    y = BAND_GAP
    for name, row in rows:
        parts.append(f'<text x="4" y="{y + BAND_HEIGHT * 0.65:.1f}">{name}</text>')
        parts.append(f'<g transform="translate({LABEL_GUTTER:.0f} 0)">')
        for label, start, end in _runs(row):
            x0, x1 = boundaries[start], boundaries[end]
            parts.append(
                f'<path d="M {x0} {y:.1f} H {x1} V {y + BAND_HEIGHT:.1f} '
                f'H {x0} Z" fill="{palette[label]}"/>')
        parts.append("</g>")
        y += BAND_HEIGHT + BAND_GAP
    y += BAND_GAP
    for c in classes:
        parts.append(f'<rect x="{LABEL_GUTTER:.0f}" y="{y:.1f}" width="14" '
                     f'height="14" fill="{palette[c]}"/>')
        label = {(-1): "ignore", (-2): "no class"}.get(c, f"class {c}")
        parts.append(f'<text x="{LABEL_GUTTER + 20:.0f}" '
                     f'y="{y + 11:.1f}">{label}</text>')
        y += 22.0
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def render_similarity_svg(g) -> str:
    """Grayscale heatmap of a square similarity matrix; 1 -> black, 0 -> white."""
    g = np.asarray(g, dtype=np.float64)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise ValueError(f"similarity matrix must be square, got {g.shape}")
    n = g.shape[0]
    shade = np.clip(np.rint(255.0 * (1.0 - np.clip(g, 0.0, 1.0))), 0,
                    255).astype(int)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="512" height="512" '
        f'viewBox="0 0 {n} {n}" shape-rendering="crispEdges">',
    ]
    for i in range(n):
        for j in range(n):
            c = shade[i, j]
            parts.append(f'<rect x="{j}" y="{i}" width="1" height="1" '
                         f'fill="#{c:02x}{c:02x}{c:02x}"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
