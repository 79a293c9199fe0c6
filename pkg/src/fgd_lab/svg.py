"""Static SVG log-log charts for MSE trajectories.

Hand-rolled SVG 1.1 (polylines, decade ticks, dashed reference lines) so
that output is byte-deterministic given identical inputs and carries no
plotting-framework dependency.
"""

import math

WIDTH, HEIGHT = 880, 620
MARGIN_LEFT, MARGIN_RIGHT, MARGIN_TOP, MARGIN_BOTTOM = 80, 30, 50, 60

_METHOD_COLORS = {
    "forward_gradient": "#1f77b4",
    "sgd": "#d62728",
    "zeroth_order": "#2ca02c",
    "theory-exact": "#000000",
    "theory-bound": "#8c564b",
}
_REFERENCE_LABELS = ("d^2 log(d)/k", "d^2/k", "d/k")


def _color(method: str) -> str:
    return _METHOD_COLORS.get(method, "#7f7f7f")


class _LogLogFrame:
    def __init__(self, x_range, y_range):
        self.x0 = math.floor(math.log10(x_range[0]))
        self.x1 = math.ceil(math.log10(x_range[1]))
        self.y0 = math.floor(math.log10(y_range[0]))
        self.y1 = math.ceil(math.log10(y_range[1]))
        if self.x1 == self.x0:
            self.x1 += 1
        if self.y1 == self.y0:
            self.y1 += 1

    def x(self, k: float) -> float:
        frac = (math.log10(k) - self.x0) / (self.x1 - self.x0)
        return MARGIN_LEFT + frac * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)

    def y(self, value: float) -> float:
        frac = (math.log10(value) - self.y0) / (self.y1 - self.y0)
        return HEIGHT - MARGIN_BOTTOM - frac * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)


def _polyline(points, css_class, stroke, dashed=False, extra=""):
    coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in points)
    dash = ' stroke-dasharray="7,5"' if dashed else ""
    return (
        f'<polyline class="{css_class}" fill="none" stroke="{stroke}" '
        f'stroke-width="1.2"{dash}{extra} points="{coords}" />'
    )


def render_loglog_svg(trajectories, references=None, k_star_mark=None, title="") -> str:
    """SVG document with one polyline per trajectory plus optional dashed
    reference lines and a vertical burn-in marker.

    Points with k <= 0 or mse <= 0 cannot be placed on log axes and are
    skipped.
    """
    series = []
    for t in trajectories:
        pts = [(k, m) for k, m in t.records if k > 0 and m > 0]
        if pts:
            series.append((t.method, t.run_id, pts))
    if not series:
        raise ValueError("no positive (k, mse) records to plot")

    all_k = [k for _, _, pts in series for k, _ in pts]
    all_v = [v for _, _, pts in series for _, v in pts]
    if references is not None:
        all_k.extend(float(k) for k in references.ks)
        for curve in (references.upper, references.middle, references.lower):
            all_v.extend(float(v) for v in curve)
    frame = _LogLogFrame((min(all_k), max(all_k)), (min(all_v), max(all_v)))

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white" />',
        f'<text x="{WIDTH / 2:.0f}" y="28" text-anchor="middle" '
        f'font-family="monospace" font-size="16">{title}</text>',
    ]

    plot_x1 = WIDTH - MARGIN_RIGHT
    plot_y1 = HEIGHT - MARGIN_BOTTOM
    for exp in range(frame.x0, frame.x1 + 1):
        x = frame.x(10.0**exp)
        parts.append(
            f'<line x1="{x:.2f}" y1="{MARGIN_TOP}" x2="{x:.2f}" y2="{plot_y1}" '
            f'stroke="#dddddd" stroke-width="0.8" />'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{plot_y1 + 20}" text-anchor="middle" '
            f'font-family="monospace" font-size="12">1e{exp}</text>'
        )
    for exp in range(frame.y0, frame.y1 + 1):
        y = frame.y(10.0**exp)
        parts.append(
            f'<line x1="{MARGIN_LEFT}" y1="{y:.2f}" x2="{plot_x1}" y2="{y:.2f}" '
            f'stroke="#dddddd" stroke-width="0.8" />'
        )
        parts.append(
            f'<text x="{MARGIN_LEFT - 8}" y="{y + 4:.2f}" text-anchor="end" '
            f'font-family="monospace" font-size="12">1e{exp}</text>'
        )
    parts.append(
        f'<rect x="{MARGIN_LEFT}" y="{MARGIN_TOP}" width="{plot_x1 - MARGIN_LEFT}" '
        f'height="{plot_y1 - MARGIN_TOP}" fill="none" stroke="#333333" stroke-width="1" />'
    )
    parts.append(
        f'<text x="{(MARGIN_LEFT + plot_x1) / 2:.0f}" y="{HEIGHT - 16}" text-anchor="middle" '
        f'font-family="monospace" font-size="13">step k</text>'
    )
    parts.append(
        f'<text x="22" y="{(MARGIN_TOP + plot_y1) / 2:.0f}" text-anchor="middle" '
        f'font-family="monospace" font-size="13" '
        f'transform="rotate(-90 22 {(MARGIN_TOP + plot_y1) / 2:.0f})">MSE</text>'
    )

    if k_star_mark is not None and min(all_k) <= k_star_mark <= max(all_k):
        x = frame.x(k_star_mark)
        parts.append(
            f'<line class="kstar" x1="{x:.2f}" y1="{MARGIN_TOP}" x2="{x:.2f}" '
            f'y2="{plot_y1}" stroke="#555555" stroke-width="1" stroke-dasharray="2,4" />'
        )
        parts.append(
            f'<text x="{x + 4:.2f}" y="{MARGIN_TOP + 14}" font-family="monospace" '
            f'font-size="12">k*</text>'
        )

    if references is not None:
        curves = (references.upper, references.middle, references.lower)
        for label, curve in zip(_REFERENCE_LABELS, curves):
            pts = [
                (frame.x(float(k)), frame.y(float(v)))
                for k, v in zip(references.ks, curve)
                if k > 0 and v > 0
            ]
            parts.append(_polyline(pts, "reference", "#444444", dashed=True))
            parts.append(
                f'<text x="{pts[-1][0] - 4:.2f}" y="{pts[-1][1] - 6:.2f}" text-anchor="end" '
                f'font-family="monospace" font-size="11">{label}</text>'
            )

    for method, run_id, pts in series:
        frame_pts = [(frame.x(k), frame.y(v)) for k, v in pts]
        extra = f' data-method="{method}" data-run="{run_id}"'
        parts.append(_polyline(frame_pts, "trajectory", _color(method), extra=extra))

    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def write_svg(path, document: str):
    with open(path, "w", newline="", encoding="ascii") as f:
        f.write(document)
