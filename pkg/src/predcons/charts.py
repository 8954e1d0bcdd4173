"""Static SVG charts written directly as text."""

from __future__ import annotations

from html import escape

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f")
WIDTH, HEIGHT, PAD = 480, 360, 48


def _scale(lo, hi, out_lo, out_hi):
    span = (hi - lo) or 1.0
    return lambda v: out_lo + (np.asarray(v) - lo) / span * (out_hi - out_lo)


def _frame(title: str, body: list[str], width=WIDTH, height=HEIGHT) -> str:
    head = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">'
    )
    return "\n".join([head, f'<text x="{width / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>',
                      *body, "</svg>\n"])


def line_chart(series, title: str = "", points=None, y_range=None) -> str:
    """``series`` is a list of ``(label, xs, ys)``; ``points`` an optional list of ``(label, xs, ys)`` scatters."""
    points = points or []
    all_x = np.concatenate([np.asarray(s[1]) for s in series + points])
    all_y = np.concatenate([np.asarray(s[2]) for s in series + points])
    y_lo, y_hi = y_range if y_range else (float(all_y.min()), float(all_y.max()))
    sx = _scale(float(all_x.min()), float(all_x.max()), PAD, WIDTH - PAD)
    sy = _scale(y_lo, y_hi, HEIGHT - PAD, PAD)
    body = [
        f'<rect x="{PAD}" y="{PAD}" width="{WIDTH - 2 * PAD}" height="{HEIGHT - 2 * PAD}" fill="none" stroke="#999"/>',
        f'<text x="{PAD}" y="{HEIGHT - PAD + 14}">{all_x.min():.3g}</text>',
        f'<text x="{WIDTH - PAD}" y="{HEIGHT - PAD + 14}" text-anchor="end">{all_x.max():.3g}</text>',
        f'<text x="{PAD - 4}" y="{HEIGHT - PAD}" text-anchor="end">{y_lo:.3g}</text>',
        f'<text x="{PAD - 4}" y="{PAD + 8}" text-anchor="end">{y_hi:.3g}</text>',
        f'<clipPath id="plot"><rect x="{PAD}" y="{PAD}" width="{WIDTH - 2 * PAD}" height="{HEIGHT - 2 * PAD}"/></clipPath>',
    ]
    for k, (label, xs, ys) in enumerate(points):
        color = PALETTE[k % len(PALETTE)]
        for x, y in zip(sx(xs), sy(ys)):
            body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="1.8" fill="{color}" fill-opacity="0.4" clip-path="url(#plot)"/>')
    for k, (label, xs, ys) in enumerate(series):
        color = PALETTE[k % len(PALETTE)]
        pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(sx(xs), sy(ys)))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5" clip-path="url(#plot)"/>')
        body.append(f'<text x="{WIDTH - PAD + 4}" y="{PAD + 12 * (k + 1)}" fill="{color}">{escape(str(label))}</text>')
    return _frame(title, body, width=WIDTH + 60)


def heatmap(matrix, title: str = "", fmt: str = "{:.3f}") -> str:
    m = np.asarray(matrix, dtype=np.float64)
    n_r, n_c = m.shape
    cell = min((WIDTH - 2 * PAD) / n_c, (HEIGHT - 2 * PAD) / n_r)
    lo, hi = float(m.min()), float(m.max())
    body = []
    for i in range(n_r):
        for j in range(n_c):
            t = 0.0 if hi == lo else (m[i, j] - lo) / (hi - lo)
            shade = int(round(255 * (1 - t)))
            x, y = PAD + j * cell, PAD + i * cell
            body.append(f'<rect x="{x:.1f}" y="{y:.1f}" width="{cell:.1f}" height="{cell:.1f}" '
                        f'fill="rgb({shade},{shade},255)" stroke="#fff"/>')
            color = "#fff" if t > 0.6 else "#000"
            body.append(f'<text x="{x + cell / 2:.1f}" y="{y + cell / 2 + 4:.1f}" text-anchor="middle" '
                        f'fill="{color}">{fmt.format(m[i, j])}</text>')
        body.append(f'<text x="{PAD - 6}" y="{PAD + (i + 0.5) * cell + 4:.1f}" text-anchor="end">{i}</text>')
    for j in range(n_c):
        body.append(f'<text x="{PAD + (j + 0.5) * cell:.1f}" y="{PAD - 6}" text-anchor="middle">{j}</text>')
    return _frame(title, body)


def class_raster(labels, extent, title: str = "", points=None) -> str:
    """Decision regions from a (rows, cols) grid of class ids; rows run bottom to top.

    Horizontal runs of equal class are merged into one rectangle each.
    """
    labels = np.asarray(labels)
    rows, cols = labels.shape
    x0, x1, y0, y1 = extent
    size = HEIGHT - 2 * PAD
    cw, ch = size / cols, size / rows
    body = []
    for r in range(rows):
        y = PAD + (rows - 1 - r) * ch
        start = 0
        for c in range(1, cols + 1):
            if c == cols or labels[r, c] != labels[r, start]:
                color = PALETTE[int(labels[r, start]) % len(PALETTE)]
                body.append(f'<rect x="{PAD + start * cw:.2f}" y="{y:.2f}" width="{(c - start) * cw:.2f}" '
                            f'height="{ch:.2f}" fill="{color}" fill-opacity="0.35"/>')
                start = c
    if points is not None:
        px, py, plab = points
        sx = _scale(x0, x1, PAD, PAD + size)
        sy = _scale(y0, y1, PAD + size, PAD)
        for x, y, lab in zip(sx(px), sy(py), plab):
            body.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="2" fill="{PALETTE[int(lab) % len(PALETTE)]}"/>')
    body.append(f'<rect x="{PAD}" y="{PAD}" width="{size}" height="{size}" fill="none" stroke="#999"/>')
    return _frame(title, body, width=size + 2 * PAD)
