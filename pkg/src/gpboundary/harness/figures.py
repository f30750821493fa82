"""SVG rendering of an image with truth, estimate and credible band."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..geometry import PolarImage, angle_grid, curve_at

SIZE = 600
MAX_PIXELS = 20_000


def _to_svg(x, y):
    # image square [-1/2, 1/2]^2 onto the canvas, y pointing up
    return (x + 0.5) * SIZE, (0.5 - y) * SIZE


def _points(radii, grid):
    x, y = _to_svg(radii * np.cos(grid), radii * np.sin(grid))
    return " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(x, y))


def band_vertices(band, grid) -> np.ndarray:
    """Closed polygon around the band: upper curve, lower curve reversed, first vertex again."""
    upper = np.column_stack([band.upper * np.cos(grid), band.upper * np.sin(grid)])
    lower = np.column_stack([band.lower * np.cos(grid), band.lower * np.sin(grid)])[::-1]
    return np.vstack([upper, lower, upper[:1]])


def _gray(values):
    lo, hi = np.percentile(values, [1, 99])
    scaled = np.clip((values - lo) / (hi - lo), 0, 1) if hi > lo else np.full(values.shape, 0.5)
    return (40 + 200 * scaled).astype(int)


def render_figure(image: PolarImage, truth, estimate, band=None, path="figure.svg", grid=None) -> Path:
    """Write an SVG with pixels shaded by intensity, the truth (dotted), estimate (red) and band (gray).

    ``truth`` and ``estimate`` are callables or arrays on ``grid`` (default:
    the band grid, or 512 angles).  Large images are thinned to at most
    20000 drawn pixels by a fixed stride.
    """
    if grid is None:
        grid = band.grid if band is not None else angle_grid(512)
    grid = np.asarray(grid, dtype=float)
    truth_r = curve_at(truth, grid)
    est_r = curve_at(estimate, grid)

    stride = max(1, -(-image.n // MAX_PIXELS))
    xy = image.cartesian()[::stride]
    shade = _gray(image.y[::stride])
    px, py = _to_svg(xy[:, 0], xy[:, 1])
    dot = max(0.6, 0.5 * SIZE / np.sqrt(image.n / stride))

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">',
        f'<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white"/>',
        '<g id="pixels" stroke="none">',
    ]
    lines += [
        f'<circle cx="{a:.2f}" cy="{b:.2f}" r="{dot:.2f}" fill="rgb({g},{g},{g})"/>'
        for a, b, g in zip(px, py, shade)
    ]
    lines.append("</g>")
    if band is not None:
        v = band_vertices(band, grid)
        bx, by = _to_svg(v[:, 0], v[:, 1])
        pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(bx, by))
        lines.append(f'<polygon id="band" points="{pts}" fill="gray" fill-opacity="0.45" stroke="none"/>')
    lines.append(
        f'<polygon id="truth" points="{_points(truth_r, grid)}" fill="none" stroke="black" '
        'stroke-width="2" stroke-dasharray="4,3"/>'
    )
    lines.append(f'<polygon id="estimate" points="{_points(est_r, grid)}" fill="none" stroke="red" stroke-width="2"/>')
    lines.append("</svg>")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n")
    return path
