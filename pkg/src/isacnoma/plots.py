"""Self-contained SVG line plots of a finished sweep.

Only the standard library is used so figures can be produced anywhere the
simulator runs.  Output is deterministic text for identical summaries.
"""

from __future__ import annotations

import math
import os
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 420
MARGIN = dict(left=64, right=200, top=40, bottom=52)
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list:
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return [0.0, 1.0]
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / count
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.floor(lo / step) * step
    ticks = []
    t = start
    while t <= hi + step * 1e-9:
        ticks.append(round(t, 10))
        t += step
    if ticks[-1] < hi:
        ticks.append(round(ticks[-1] + step, 10))
    return ticks


def line_plot_svg(series, title: str, xlabel: str, ylabel: str) -> str:
    """Render ``series`` (list of ``(label, xs, ys, dashed)``) as an SVG document."""
    xs_all = [x for _, xs, _, _ in series for x in xs]
    ys_all = [y for _, _, ys, _ in series for y in ys if math.isfinite(y)]
    xt = _nice_ticks(min(xs_all, default=0.0), max(xs_all, default=1.0))
    yt = _nice_ticks(min(0.0, min(ys_all, default=0.0)), max(ys_all, default=1.0))
    x0, x1, y0, y1 = xt[0], xt[-1], yt[0], yt[-1]
    pw = WIDTH - MARGIN["left"] - MARGIN["right"]
    ph = HEIGHT - MARGIN["top"] - MARGIN["bottom"]
    sx = lambda x: MARGIN["left"] + (x - x0) / (x1 - x0) * pw
    sy = lambda y: MARGIN["top"] + ph - (y - y0) / (y1 - y0) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
           f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
           f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
           f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="22" text-anchor="middle" '
           f'font-size="15">{escape(title)}</text>']
    for t in xt:
        out.append(f'<line x1="{sx(t):.1f}" y1="{MARGIN["top"]}" x2="{sx(t):.1f}" '
                   f'y2="{MARGIN["top"] + ph}" stroke="#ddd"/>')
        out.append(f'<text x="{sx(t):.1f}" y="{MARGIN["top"] + ph + 16}" '
                   f'text-anchor="middle">{t:g}</text>')
    for t in yt:
        out.append(f'<line x1="{MARGIN["left"]}" y1="{sy(t):.1f}" x2="{MARGIN["left"] + pw}" '
                   f'y2="{sy(t):.1f}" stroke="#ddd"/>')
        out.append(f'<text x="{MARGIN["left"] - 6}" y="{sy(t) + 4:.1f}" '
                   f'text-anchor="end">{t:g}</text>')
    out.append(f'<rect x="{MARGIN["left"]}" y="{MARGIN["top"]}" width="{pw}" height="{ph}" '
               f'fill="none" stroke="black"/>')
    out.append(f'<text x="{MARGIN["left"] + pw / 2:.1f}" y="{HEIGHT - 12}" '
               f'text-anchor="middle">{escape(xlabel)}</text>')
    out.append(f'<text transform="translate(18 {MARGIN["top"] + ph / 2:.1f}) rotate(-90)" '
               f'text-anchor="middle">{escape(ylabel)}</text>')

    for i, (label, xs, ys, dashed) in enumerate(series):
        colour = PALETTE[(i // 2 if any(s[3] for s in series) else i) % len(PALETTE)]
        pts = [(sx(x), sy(y)) for x, y in zip(xs, ys) if math.isfinite(y)]
        dash = ' stroke-dasharray="6 4"' if dashed else ""
        if pts:
            path = " ".join(f"{x:.1f},{y:.1f}" for x, y in pts)
            out.append(f'<polyline points="{path}" fill="none" stroke="{colour}" '
                       f'stroke-width="2"{dash}/>')
            out.extend(f'<circle cx="{x:.1f}" cy="{y:.1f}" r="3" fill="{colour}"/>'
                       for x, y in pts)
        ly = MARGIN["top"] + 12 + 18 * i
        lx = MARGIN["left"] + pw + 12
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 24}" y2="{ly}" stroke="{colour}" '
                   f'stroke-width="2"{dash}/>')
        out.append(f'<text x="{lx + 30}" y="{ly + 4}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _scenario_names(summary) -> list:
    names = []
    for r in summary.rows:
        if r.scenario.name not in names:
            names.append(r.scenario.name)
    return names


def _snr(summary, name) -> list:
    return [r.snr_db for r in summary.rows if r.scenario.name == name]


def write_figures(summary, directory) -> list:
    """Write total-rate, comm-vs-sense and per-user figures; return their paths."""
    os.makedirs(directory, exist_ok=True)
    names = _scenario_names(summary)
    figures = {
        "total_rate.svg": line_plot_svg(
            [(n, _snr(summary, n), list(summary.series(n, "r_total")), False) for n in names],
            "Total sum rate", "SNR (dB)", "mean rate (bps/Hz)"),
        "comm_vs_sense.svg": line_plot_svg(
            [item for n in names for item in (
                (f"{n} comm", _snr(summary, n), list(summary.series(n, "r_comm_sum")), False),
                (f"{n} sense", _snr(summary, n), list(summary.series(n, "r_sense_sum")), True))],
            "Communication vs sensing", "SNR (dB)", "mean sum rate (bps/Hz)"),
        "user_rates.svg": line_plot_svg(
            [item for n in names for item in (
                (f"{n} user1", _snr(summary, n),
                 [a + b for a, b in zip(summary.series(n, "r_user1_k0"),
                                        summary.series(n, "r_user1_k1"))], False),
                (f"{n} user2", _snr(summary, n), list(summary.series(n, "r_user2_sum")), True))],
            "Per-user rates", "SNR (dB)", "mean rate (bps/Hz)"),
    }
    paths = []
    for name, text in figures.items():
        path = os.path.join(directory, name)
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        paths.append(path)
    return paths
