"""SVG rendering of a control chart without a plotting dependency."""

from __future__ import annotations

from typing import Collection, Sequence
from xml.sax.saxutils import escape, quoteattr

from depthmon.charting import SignalRecord
from depthmon.reference import Phase

PHASE_COLORS = {
    Phase.PHASE_I: "#2ca02c",
    Phase.PHASE_II_IN_CONTROL: "#1f77b4",
    Phase.PHASE_II_OUT_OF_CONTROL: "#d62728",
    Phase.UNLABELED: "#7f7f7f",
}
PHASE_NAMES = {
    Phase.PHASE_I: "Phase I",
    Phase.PHASE_II_IN_CONTROL: "Phase II in-control",
    Phase.PHASE_II_OUT_OF_CONTROL: "Phase II out-of-control",
    Phase.UNLABELED: "Phase II unlabeled",
}

WIDTH, HEIGHT = 800, 360
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 60, 190, 30, 45


def _num(x: float) -> str:
    return f"{x:.2f}"


def render_chart_svg(
    signals: Sequence[SignalRecord],
    lcl: float,
    title: str = "",
    misclassified: Collection[int] = (),
) -> str:
    """Statistic against stream index with the lower control limit.

    Points are coloured by phase; Phase II points whose index is in
    ``misclassified`` get a black ring. Element ids (``lcl``, ``points``,
    ``legend``) make the output easy to inspect structurally.
    """
    mis = set(misclassified)
    plot_w = WIDTH - MARGIN_L - MARGIN_R
    plot_h = HEIGHT - MARGIN_T - MARGIN_B
    xs = [s.index for s in signals] or [0]
    x_lo, x_hi = min(xs), max(xs)
    span = max(x_hi - x_lo, 1)

    def px(i):
        return MARGIN_L + (i - x_lo) / span * plot_w

    def py(v):
        return MARGIN_T + (1.0 - min(max(v, 0.0), 1.0)) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text id="title" x="{MARGIN_L}" y="{MARGIN_T - 10}" font-size="14" font-family="sans-serif">'
        f"{escape(title)}</text>",
        '<g id="axes" stroke="black" stroke-width="1">',
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T + plot_h}" x2="{MARGIN_L + plot_w}" y2="{MARGIN_T + plot_h}"/>',
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{MARGIN_T + plot_h}"/>',
        "</g>",
        '<g id="ticks" font-size="10" font-family="sans-serif">',
    ]
    for v in (0.0, 0.25, 0.5, 0.75, 1.0):
        out.append(f'<text x="{MARGIN_L - 8}" y="{_num(py(v) + 3)}" text-anchor="end">{v:g}</text>')
    for i in (x_lo, x_hi):
        out.append(f'<text x="{_num(px(i))}" y="{MARGIN_T + plot_h + 15}" text-anchor="middle">{i}</text>')
    out.append(
        f'<text x="{MARGIN_L + plot_w / 2:.2f}" y="{HEIGHT - 8}" text-anchor="middle">index</text>'
    )
    out.append("</g>")
    out.append(
        f'<line id="lcl" x1="{MARGIN_L}" y1="{_num(py(lcl))}" x2="{MARGIN_L + plot_w}" y2="{_num(py(lcl))}" '
        f'stroke="black" stroke-dasharray="6,4" data-value={quoteattr(repr(float(lcl)))}/>'
    )
    out.append('<g id="points">')
    for s in signals:
        attrs = (
            f'cx="{_num(px(s.index))}" cy="{_num(py(s.statistic))}" r="3" fill="{PHASE_COLORS[s.phase]}" '
            f'data-index="{s.index}" data-phase="{s.phase.value}" data-signal="{int(s.signal)}"'
        )
        out.append(f"<circle {attrs}/>")
        if s.phase is not Phase.PHASE_I and s.index in mis:
            out.append(
                f'<circle class="misclassified" cx="{_num(px(s.index))}" cy="{_num(py(s.statistic))}" r="6" '
                f'fill="none" stroke="black"/>'
            )
    out.append("</g>")
    out.append('<g id="legend" font-size="11" font-family="sans-serif">')
    lx = MARGIN_L + plot_w + 15
    present = [p for p in Phase if any(s.phase is p for s in signals)]
    y = MARGIN_T + 10
    for p in present:
        out.append(f'<circle cx="{lx}" cy="{y}" r="4" fill="{PHASE_COLORS[p]}"/>')
        out.append(f'<text x="{lx + 10}" y="{y + 4}">{PHASE_NAMES[p]}</text>')
        y += 18
    if mis:
        out.append(f'<circle cx="{lx}" cy="{y}" r="6" fill="none" stroke="black"/>')
        out.append(f'<text x="{lx + 10}" y="{y + 4}">misclassified</text>')
        y += 18
    out.append(f'<line x1="{lx - 6}" y1="{y}" x2="{lx + 6}" y2="{y}" stroke="black" stroke-dasharray="3,2"/>')
    out.append(f'<text x="{lx + 10}" y="{y + 4}">LCL = {lcl:.4f}</text>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
