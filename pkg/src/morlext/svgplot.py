"""Dependency-free SVG scatter of a front.

Fixed 800x600 canvas, axes auto-scaled to the data with a 5% margin.
Stage is encoded by marker shape (circle = extended, square =
fine_tuned) and base policies (all-zero coefficient provenance) get a
highlight ring. Three-objective fronts render as pairwise projections.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

WIDTH, HEIGHT = 800, 600
MARGIN_FRAC = 0.05
PAD_LEFT, PAD_RIGHT, PAD_TOP, PAD_BOTTOM = 70, 20, 40, 50

STAGE_COLORS = {"extended": "#1f77b4", "fine_tuned": "#d62728"}


def _scale(values: np.ndarray, lo_px: float, hi_px: float) -> tuple[float, float, float, float]:
    vmin, vmax = float(values.min()), float(values.max())
    span = vmax - vmin
    if span == 0:
        span = max(abs(vmin), 1.0)
    vmin -= MARGIN_FRAC * span
    vmax += MARGIN_FRAC * span
    return vmin, vmax, lo_px, hi_px


def _panel(
    points: list[tuple[float, float, str, bool]],
    x_label: str,
    y_label: str,
    origin_x: float,
    panel_width: float,
) -> list[str]:
    xs = np.array([p[0] for p in points])
    ys = np.array([p[1] for p in points])
    x_min, x_max, px_lo, px_hi = _scale(xs, origin_x + PAD_LEFT, origin_x + panel_width - PAD_RIGHT)
    y_min, y_max, py_lo, py_hi = _scale(ys, HEIGHT - PAD_BOTTOM, PAD_TOP)

    def to_px(x: float, y: float) -> tuple[float, float]:
        fx = (x - x_min) / (x_max - x_min)
        fy = (y - y_min) / (y_max - y_min)
        return px_lo + fx * (px_hi - px_lo), py_lo + fy * (py_hi - py_lo)

    parts = [
        f'<rect x="{origin_x + PAD_LEFT}" y="{PAD_TOP}" '
        f'width="{panel_width - PAD_LEFT - PAD_RIGHT}" height="{HEIGHT - PAD_TOP - PAD_BOTTOM}" '
        'fill="none" stroke="#444" stroke-width="1"/>',
        f'<text x="{origin_x + PAD_LEFT + (panel_width - PAD_LEFT - PAD_RIGHT) / 2}" '
        f'y="{HEIGHT - 12}" text-anchor="middle" font-size="14">{x_label}</text>',
        f'<text x="{origin_x + 18}" y="{HEIGHT / 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 {origin_x + 18} {HEIGHT / 2})">{y_label}</text>',
        f'<text x="{origin_x + PAD_LEFT - 6}" y="{HEIGHT - PAD_BOTTOM + 16}" '
        f'text-anchor="end" font-size="11">{x_min:.3g}</text>',
        f'<text x="{origin_x + panel_width - PAD_RIGHT}" y="{HEIGHT - PAD_BOTTOM + 16}" '
        f'text-anchor="end" font-size="11">{x_max:.3g}</text>',
        f'<text x="{origin_x + PAD_LEFT - 8}" y="{HEIGHT - PAD_BOTTOM}" '
        f'text-anchor="end" font-size="11">{y_min:.3g}</text>',
        f'<text x="{origin_x + PAD_LEFT - 8}" y="{PAD_TOP + 10}" '
        f'text-anchor="end" font-size="11">{y_max:.3g}</text>',
    ]
    for x, y, stage, is_base in points:
        px, py = to_px(x, y)
        color = STAGE_COLORS.get(stage, "#555555")
        if is_base:
            parts.append(
                f'<circle cx="{px:.1f}" cy="{py:.1f}" r="7" fill="none" stroke="#2ca02c" stroke-width="2"/>'
            )
        if stage == "fine_tuned":
            parts.append(
                f'<rect x="{px - 3.5:.1f}" y="{py - 3.5:.1f}" width="7" height="7" fill="{color}"/>'
            )
        else:
            parts.append(f'<circle cx="{px:.1f}" cy="{py:.1f}" r="3.5" fill="{color}"/>')
    return parts


def render_front_svg(
    path: str | Path,
    returns: np.ndarray,
    stages: list[str],
    base_flags: list[bool],
    title: str = "approximate Pareto front",
) -> None:
    """Write the scatter (or pairwise projections for d=3) to `path`."""
    returns = np.asarray(returns, dtype=np.float64)
    d = returns.shape[1]
    if d == 2:
        pairs = [(0, 1)]
    elif d == 3:
        pairs = [(0, 1), (0, 2), (1, 2)]
    else:
        raise ValueError(f"SVG rendering supports 2 or 3 objectives, got {d}")
    panel_width = WIDTH / len(pairs)
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="22" text-anchor="middle" font-size="16">{title}</text>',
    ]
    for p, (i, j) in enumerate(pairs):
        pts = [
            (float(returns[k, i]), float(returns[k, j]), stages[k], base_flags[k])
            for k in range(returns.shape[0])
        ]
        parts.extend(_panel(pts, f"objective {i + 1}", f"objective {j + 1}", p * panel_width, panel_width))
    parts.append("</svg>")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(parts))
