"""Standalone SVG line charts rendered from the package's CSV outputs.

Every ``render_*`` function reads only the CSV it is given, so re-rendering
an existing CSV reproduces the same image byte for byte.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from xml.sax.saxutils import escape

PALETTE = ("#1f4e9c", "#2a9d3c", "#c0392b", "#8e44ad", "#d35400", "#16a085", "#7f8c8d")
W, H = 640, 400
ML, MR, MT, MB = 64, 16, 32, 48


@dataclass
class Series:
    x: list[float]
    y: list[float]
    label: str = ""
    color: str = PALETTE[0]
    dashed: bool = False
    markers: bool = False


@dataclass
class Chart:
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    series: list[Series] = field(default_factory=list)
    vlines: list[tuple[float, str, str]] = field(default_factory=list)  # (x, label, color)


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / n
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step) * step
    out = []
    v = start
    while v <= hi + 1e-12 * step:
        out.append(round(v, 12))
        v += step
    return out


def _bounds(vals: list[float]) -> tuple[float, float]:
    vals = [v for v in vals if math.isfinite(v)]
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if hi == lo:
        lo, hi = lo - 0.5, hi + 0.5
    pad = 0.04 * (hi - lo)
    return lo - pad, hi + pad


def to_svg(chart: Chart) -> str:
    xs = [v for s in chart.series for v in s.x] + [v for v, _, _ in chart.vlines]
    ys = [v for s in chart.series for v in s.y]
    x0, x1 = _bounds(xs)
    y0, y1 = _bounds(ys)
    pw, ph = W - ML - MR, H - MT - MB

    def px(x):
        return ML + (x - x0) / (x1 - x0) * pw

    def py(y):
        return MT + (1.0 - (y - y0) / (y1 - y0)) * ph

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
           f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
           f'<rect width="{W}" height="{H}" fill="white"/>',
           f'<rect x="{ML}" y="{MT}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>']
    for t in _ticks(x0, x1):
        out.append(f'<line x1="{px(t):.2f}" y1="{MT + ph}" x2="{px(t):.2f}" y2="{MT + ph + 4}" stroke="#333"/>')
        out.append(f'<text x="{px(t):.2f}" y="{MT + ph + 16}" text-anchor="middle">{t:g}</text>')
    for t in _ticks(y0, y1):
        out.append(f'<line x1="{ML - 4}" y1="{py(t):.2f}" x2="{ML}" y2="{py(t):.2f}" stroke="#333"/>')
        out.append(f'<text x="{ML - 6}" y="{py(t) + 4:.2f}" text-anchor="end">{t:g}</text>')
    out.append(f'<text x="{W / 2}" y="{MT - 12}" text-anchor="middle" font-size="13">{escape(chart.title)}</text>')
    out.append(f'<text x="{ML + pw / 2}" y="{H - 10}" text-anchor="middle">{escape(chart.xlabel)}</text>')
    out.append(f'<text x="14" y="{MT + ph / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {MT + ph / 2})">{escape(chart.ylabel)}</text>')
    for x, label, color in chart.vlines:
        out.append(f'<line x1="{px(x):.2f}" y1="{MT}" x2="{px(x):.2f}" y2="{MT + ph}" '
                   f'stroke="{color}" stroke-dasharray="6 3 1 3"/>')
        out.append(f'<text x="{px(x) + 3:.2f}" y="{MT + 12}" fill="{color}">{escape(label)}</text>')
    for s in chart.series:
        pts = [(px(a), py(b)) for a, b in zip(s.x, s.y) if math.isfinite(a) and math.isfinite(b)]
        if not pts:
            continue
        if s.markers:
            for a, b in pts:
                out.append(f'<circle cx="{a:.2f}" cy="{b:.2f}" r="2.2" fill="none" stroke="{s.color}"/>')
        else:
            path = " ".join(f"{a:.2f},{b:.2f}" for a, b in pts)
            dash = ' stroke-dasharray="5 4"' if s.dashed else ""
            out.append(f'<polyline points="{path}" fill="none" stroke="{s.color}" stroke-width="1.4"{dash}/>')
    legend = [s for s in chart.series if s.label]
    for i, s in enumerate(legend):
        y = MT + 14 + 14 * i
        dash = ' stroke-dasharray="5 4"' if s.dashed else ""
        out.append(f'<line x1="{W - MR - 120}" y1="{y - 4}" x2="{W - MR - 100}" y2="{y - 4}" '
                   f'stroke="{s.color}" stroke-width="1.4"{dash}/>')
        out.append(f'<text x="{W - MR - 96}" y="{y}">{escape(s.label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _read(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _f(v: str) -> float:
    return float(v) if v not in ("", None) else math.nan


def _segments(rows, key_x, key_y, flag):
    """Split rows into runs of equal ``flag(row)``; each run shares its boundary point."""
    runs = []
    for row in rows:
        f = flag(row)
        if runs and runs[-1][0] == f:
            runs[-1][1].append(row)
        else:
            if runs:
                runs[-1][1].append(row)
            runs.append([f, [row]])
    return [(f, [_f(r[key_x]) for r in rs], [_f(r[key_y]) for r in rs]) for f, rs in runs]


def render_sweep(csv_path, critical_csv=None, title: str = "", vlines=()) -> str:
    """Impact velocities against ``d``; solid where stable and valid, dashed otherwise."""
    rows = sorted(_read(csv_path), key=lambda r: _f(r["d"]))
    chart = Chart(title=title, xlabel="d", ylabel="Zdot at impact")

    def stable(r):
        return r.get("valid") == "true" and r.get("class") in ("StableNode", "StableFocus")

    for i, key in enumerate(("v_k", "v_k1", "v_k2")):
        usable = [r for r in rows if r.get(key, "") != ""]
        for j, (f, x, y) in enumerate(_segments(usable, "d", key, stable)):
            chart.series.append(Series(x, y, key if j == 0 else "", PALETTE[i], dashed=not f))
    if critical_csv is not None:
        for r in _read(critical_csv):
            chart.vlines.append((_f(r["d"]), r["kind"], "#c0392b"))
    chart.vlines.extend(vlines)
    return to_svg(chart)


def render_stability(csv_path, title: str = "") -> str:
    """Real parts of the return-map eigenvalues and the discriminant against ``d``."""
    rows = sorted(_read(csv_path), key=lambda r: _f(r["d"]))
    x = [_f(r["d"]) for r in rows]
    chart = Chart(title=title, xlabel="d", ylabel="Re(lambda), Delta")
    chart.series.append(Series(x, [_f(r["lambda1_re"]) for r in rows], "Re lambda1", PALETTE[0]))
    chart.series.append(Series(x, [_f(r["lambda2_re"]) for r in rows], "Re lambda2", PALETTE[1]))
    chart.series.append(Series(x, [_f(r["delta"]) for r in rows], "Delta", PALETTE[3], dashed=True))
    chart.series.append(Series(x, [-1.0] * len(x), "-1", PALETTE[2], dashed=True))
    return to_svg(chart)


def render_trajectory(csv_path, title: str = "") -> str:
    rows = _read(csv_path)
    t = [_f(r["t"]) for r in rows]
    chart = Chart(title=title, xlabel="t", ylabel="absolute displacement")
    chart.series.append(Series(t, [_f(r["X_top"]) for r in rows], "X* + d/2", PALETTE[0]))
    chart.series.append(Series(t, [_f(r["X_bottom"]) for r in rows], "X* - d/2", PALETTE[0]))
    chart.series.append(Series(t, [_f(r["x_ball"]) for r in rows], "x*", PALETTE[2]))
    return to_svg(chart)


def render_phase(csv_path, title: str = "") -> str:
    rows = _read(csv_path)
    chart = Chart(title=title, xlabel="Z", ylabel="Zdot")
    # break the curve at impacts so velocity jumps are not drawn as segments
    xs, ys = [], []
    for r in rows:
        z, v = _f(r["Z"]), _f(r["Zdot"])
        if ys and abs(v - ys[-1]) > 0.05:
            chart.series.append(Series(xs, ys, "", PALETTE[0]))
            xs, ys = [], []
        xs.append(z)
        ys.append(v)
    if xs:
        chart.series.append(Series(xs, ys, "", PALETTE[0]))
    return to_svg(chart)


def render_energy(csv_path, title: str = "", xkey: str = "d") -> str:
    rows = sorted((r for r in _read(csv_path) if r.get("U_I_avg")), key=lambda r: _f(r[xkey]))
    x = [_f(r[xkey]) for r in rows]
    chart = Chart(title=title, xlabel=xkey, ylabel="output voltage")
    chart.series.append(Series(x, [_f(r["U_I_avg"]) for r in rows], "U_I", PALETTE[2], markers=True))
    chart.series.append(Series(x, [_f(r["U_T_avg"]) for r in rows], "U_T", PALETTE[5], markers=True))
    return to_svg(chart)
