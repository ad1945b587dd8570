"""Dependency-free SVG line charts of output SNR against input SNR."""

from __future__ import annotations

import math
from pathlib import Path
from xml.sax.saxutils import escape

from rdcnn.errors import ContractError

WIDTH, HEIGHT = 720, 450
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 70, 190, 40, 60
PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


def _nice_ticks(lo, hi, target=6):
    if hi <= lo:
        lo, hi = lo - 1.0, hi + 1.0
    raw = (hi - lo) / target
    mag = 10 ** math.floor(math.log10(raw))
    step = next(m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw)
    start = math.floor(lo / step) * step
    ticks = []
    v = start
    while v <= hi + step * 1e-9:
        ticks.append(round(v, 10))
        v += step
    if ticks[-1] < hi:
        ticks.append(round(ticks[-1] + step, 10))
    return ticks


def _fmt(v):
    return f"{v:.2f}"


def render_svg(series, title="", x_label="Input SNR (dB)", y_label="Output SNR (dB)") -> str:
    """SVG text for ``series``: a list of ``(label, [(x, y), ...])``."""
    pts = [(x, y) for _, s in series for x, y in s if math.isfinite(y)]
    if not pts:
        raise ContractError("nothing to plot")
    xt = _nice_ticks(min(p[0] for p in pts), max(p[0] for p in pts))
    yt = _nice_ticks(min(p[1] for p in pts), max(p[1] for p in pts))
    pw, ph = WIDTH - MARGIN_L - MARGIN_R, HEIGHT - MARGIN_T - MARGIN_B

    def sx(x):
        return MARGIN_L + (x - xt[0]) / (xt[-1] - xt[0]) * pw

    def sy(y):
        return MARGIN_T + ph - (y - yt[0]) / (yt[-1] - yt[0]) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="22" text-anchor="middle" font-size="14">{escape(title)}</text>',
    ]
    for x in xt:
        px = _fmt(sx(x))
        out.append(f'<line x1="{px}" y1="{MARGIN_T}" x2="{px}" y2="{MARGIN_T + ph}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{px}" y="{MARGIN_T + ph + 18}" text-anchor="middle">{x:g}</text>')
    for y in yt:
        py = _fmt(sy(y))
        out.append(f'<line x1="{MARGIN_L}" y1="{py}" x2="{MARGIN_L + pw}" y2="{py}" stroke="#e0e0e0"/>')
        out.append(f'<text x="{MARGIN_L - 8}" y="{py}" text-anchor="end" dominant-baseline="middle">{y:g}</text>')
    out.append(f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{pw}" height="{ph}" fill="none" stroke="black"/>')
    out.append(f'<text x="{MARGIN_L + pw / 2:.1f}" y="{HEIGHT - 18}" text-anchor="middle">{escape(x_label)}</text>')
    cy = MARGIN_T + ph / 2
    out.append(f'<text x="18" y="{cy:.1f}" text-anchor="middle" transform="rotate(-90 18 {cy:.1f})">'
               f'{escape(y_label)}</text>')
    for i, (label, s) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        finite = [(x, y) for x, y in sorted(s) if math.isfinite(y)]
        coords = " ".join(f"{_fmt(sx(x))},{_fmt(sy(y))}" for x, y in finite)
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="2" points="{coords}"/>')
        for x, y in finite:
            out.append(f'<circle cx="{_fmt(sx(x))}" cy="{_fmt(sy(y))}" r="3" fill="{color}"/>')
        ly = MARGIN_T + 10 + 18 * i
        lx = MARGIN_L + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly}" dominant-baseline="middle">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def summary_series(rows, view="best_cell", method=None, n_harmonics=None):
    """Group summary rows into plot series, one per method (or per hyper for ``view='hyper'``)."""
    picked = [r for r in rows if r.view == view
              and (method is None or r.method == method)
              and (n_harmonics is None or r.n_harmonics == n_harmonics)]
    multi_h = len({r.n_harmonics for r in picked}) > 1
    groups = {}
    for r in picked:
        label = r.method
        if view == "hyper":
            label += f" {'L' if r.method != 'ar' else 'M'}={r.hyper}"
        if multi_h:
            label += f" H={r.n_harmonics}"
        groups.setdefault(label, []).append((r.input_snr_db, r.mean))
    return sorted(groups.items(), key=lambda kv: kv[0])


def emit_plot(rows, path, view="best_cell", method=None, n_harmonics=None, title=None) -> None:
    series = summary_series(rows, view, method, n_harmonics)
    if not series:
        raise ContractError("summary has no rows for the requested view")
    if title is None:
        title = f"{method or 'all methods'} ({view})"
        if n_harmonics is not None:
            title += f", {n_harmonics} harmonics"
    Path(path).write_text(render_svg(series, title), encoding="utf-8")
