"""Minimal standalone SVG line plots; no plotting dependency.

Output is deterministic: fixed palette, fixed coordinate formatting.
"""

from __future__ import annotations

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_MARGIN_L, _MARGIN_R, _MARGIN_T, _MARGIN_B = 62, 16, 34, 46


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def line_plot(series, title: str, x_label: str, y_label: str,
              width: int = 640, height: int = 420,
              x_range=None, y_range=(0.0, 1.0)) -> str:
    """Render named line series to an SVG string.

    ``series`` is a list of (name, xs, ys) triples sharing the axes.
    """
    if not series:
        raise ValueError("need at least one series")
    if x_range is None:
        lo = min(min(xs) for _, xs, _ in series)
        hi = max(max(xs) for _, xs, _ in series)
        x_range = (lo, hi if hi > lo else lo + 1.0)
    x0, x1 = map(float, x_range)
    y0, y1 = map(float, y_range)

    plot_w = width - _MARGIN_L - _MARGIN_R
    plot_h = height - _MARGIN_T - _MARGIN_B

    def sx(x):
        return _MARGIN_L + (x - x0) / (x1 - x0) * plot_w

    def sy(y):
        return _MARGIN_T + plot_h - (y - y0) / (y1 - y0) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" '
        f'height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.0f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]

    # axes box and ticks (5 divisions per axis)
    out.append(
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="#444" stroke-width="1"/>'
    )
    for i in range(6):
        xv = x0 + (x1 - x0) * i / 5
        yv = y0 + (y1 - y0) * i / 5
        xp, yp = sx(xv), sy(yv)
        out.append(
            f'<line x1="{_fmt(xp)}" y1="{_MARGIN_T + plot_h}" x2="{_fmt(xp)}" '
            f'y2="{_MARGIN_T + plot_h + 5}" stroke="#444"/>'
        )
        out.append(
            f'<text x="{_fmt(xp)}" y="{_MARGIN_T + plot_h + 18}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="10">'
            f"{xv:g}</text>"
        )
        out.append(
            f'<line x1="{_MARGIN_L - 5}" y1="{_fmt(yp)}" x2="{_MARGIN_L}" '
            f'y2="{_fmt(yp)}" stroke="#444"/>'
        )
        out.append(
            f'<text x="{_MARGIN_L - 8}" y="{_fmt(yp + 3)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="10">{yv:g}</text>'
        )
    out.append(
        f'<text x="{_MARGIN_L + plot_w / 2:.0f}" y="{height - 8}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12">'
        f"{x_label}</text>"
    )
    out.append(
        f'<text x="14" y="{_MARGIN_T + plot_h / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 14 {_MARGIN_T + plot_h / 2:.0f})">{y_label}</text>'
    )

    for idx, (name, xs, ys) in enumerate(series):
        color = PALETTE[idx % len(PALETTE)]
        pts = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in zip(xs, ys))
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.8" data-series="{name}"/>'
        )
        ly = _MARGIN_T + 14 + 16 * idx
        lx = _MARGIN_L + plot_w - 150
        out.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="1.8"/>'
        )
        out.append(
            f'<text x="{lx + 28}" y="{ly}" font-family="sans-serif" '
            f'font-size="11">{name}</text>'
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"
