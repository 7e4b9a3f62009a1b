"""Self-contained SVG grouped bar charts; no rendering dependency.

One chart per (generator, eps pair): a group of bars per discretizer, one
bar per domain strategy, y axis fixed to the AUC band [0.4, 1.0] with the
chance level marked at 0.5.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

Y_MIN, Y_MAX = 0.4, 1.0
STRATEGY_COLORS = {
    "provided": "#4878cf",
    "direct": "#d65f5f",
    "dp": "#6acc65",
}
_FALLBACK_COLORS = ["#956cb4", "#c4ad66", "#77bedb"]


def grouped_bar_svg(
    groups: list[str],
    series: list[str],
    values: dict,
    title: str = "",
    y_label: str = "attack AUC",
) -> str:
    """Render values[(group, series)] -> float as grouped bars.

    Missing cells are skipped; values are clamped into [Y_MIN, Y_MAX].
    """
    if not groups or not series:
        raise ValueError("chart needs at least one group and one series")
    width, height = 640, 360
    margin_l, margin_r, margin_t, margin_b = 60, 20, 40, 70
    plot_w = width - margin_l - margin_r
    plot_h = height - margin_t - margin_b
    group_w = plot_w / len(groups)
    bar_w = group_w * 0.8 / len(series)

    def y_px(v: float) -> float:
        v = min(max(v, Y_MIN), Y_MAX)
        return margin_t + plot_h * (1.0 - (v - Y_MIN) / (Y_MAX - Y_MIN))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">'
        f"{escape(title)}</text>",
    ]
    # y axis, gridlines, tick labels
    tick = Y_MIN
    while tick <= Y_MAX + 1e-9:
        y = y_px(tick)
        dash = ' stroke-dasharray="4 3"' if abs(tick - 0.5) < 1e-9 else ""
        parts.append(
            f'<line x1="{margin_l}" y1="{y:.1f}" x2="{width - margin_r}" y2="{y:.1f}" '
            f'stroke="#cccccc" stroke-width="1"{dash}/>'
        )
        parts.append(
            f'<text x="{margin_l - 8}" y="{y + 4:.1f}" text-anchor="end">{tick:.1f}</text>'
        )
        tick = round(tick + 0.1, 10)
    parts.append(
        f'<text x="16" y="{margin_t + plot_h / 2:.1f}" text-anchor="middle" '
        f'transform="rotate(-90 16 {margin_t + plot_h / 2:.1f})">{escape(y_label)}</text>'
    )
    # bars
    for gi, group in enumerate(groups):
        gx = margin_l + gi * group_w + group_w * 0.1
        for si, s in enumerate(series):
            v = values.get((group, s))
            if v is None:
                continue
            x = gx + si * bar_w
            y = y_px(v)
            color = STRATEGY_COLORS.get(s, _FALLBACK_COLORS[si % len(_FALLBACK_COLORS)])
            h = margin_t + plot_h - y
            parts.append(
                f'<rect x="{x:.1f}" y="{y:.1f}" width="{bar_w:.1f}" height="{h:.1f}" '
                f'fill="{color}"><title>{escape(group)}/{escape(s)}: {v:.3f}</title></rect>'
            )
        parts.append(
            f'<text x="{margin_l + (gi + 0.5) * group_w:.1f}" '
            f'y="{height - margin_b + 18}" text-anchor="middle">{escape(group)}</text>'
        )
    # legend
    lx = margin_l
    ly = height - 24
    for si, s in enumerate(series):
        color = STRATEGY_COLORS.get(s, _FALLBACK_COLORS[si % len(_FALLBACK_COLORS)])
        parts.append(f'<rect x="{lx}" y="{ly - 10}" width="12" height="12" fill="{color}"/>')
        parts.append(f'<text x="{lx + 16}" y="{ly}">{escape(s)}</text>')
        lx += 16 + 8 * len(s) + 30
    parts.append(
        f'<line x1="{margin_l}" y1="{margin_t}" x2="{margin_l}" '
        f'y2="{margin_t + plot_h}" stroke="black"/>'
    )
    parts.append(
        f'<line x1="{margin_l}" y1="{margin_t + plot_h}" x2="{width - margin_r}" '
        f'y2="{margin_t + plot_h}" stroke="black"/>'
    )
    parts.append("</svg>")
    return "\n".join(parts)
