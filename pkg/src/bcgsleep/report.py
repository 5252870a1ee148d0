"""Static SVG renderings of the standard figures.

Pure string assembly: same inputs give byte-identical files, which is what
lets a re-run of the pipeline be diffed at the artifact level. Coordinates
are rounded to a tenth of a pixel and colors are fixed, so no float
formatting ambiguity or environment state leaks into the output.
"""

from __future__ import annotations

from typing import Optional, Sequence

from .core import Stage
from .sleepwake import SleepWakeEpoch, WakeState

_FONT = "font-family='Helvetica,Arial,sans-serif'"

# Hypnogram rows, top to bottom.
_STAGE_ROWS = (Stage.WAKE, Stage.REM, Stage.LIGHT, Stage.DEEP)
_STAGE_COLORS = {
    Stage.WAKE: "#d1495b",
    Stage.REM: "#8a4fbe",
    Stage.LIGHT: "#4f9dd0",
    Stage.DEEP: "#1d3f6e",
}


def _f(v: float) -> str:
    return f"{v:.1f}"


def _svg(width: int, height: int, body: list[str]) -> str:
    head = (
        f"<svg xmlns='http://www.w3.org/2000/svg' width='{width}' height='{height}' "
        f"viewBox='0 0 {width} {height}'>"
    )
    return "\n".join([head, f"<rect width='{width}' height='{height}' fill='#ffffff'/>"]
                     + body + ["</svg>", ""])


def _text(x, y, s, size=12, anchor="start", color="#333333") -> str:
    return (
        f"<text x='{_f(x)}' y='{_f(y)}' font-size='{size}' text-anchor='{anchor}' "
        f"fill='{color}' {_FONT}>{s}</text>"
    )


def _hline_labels(body, x0, x1, y0, y1, lo, hi, unit, n=5):
    for i in range(n):
        frac = i / (n - 1)
        val = lo + (hi - lo) * frac
        y = y1 - (y1 - y0) * frac
        body.append(
            f"<line x1='{_f(x0)}' y1='{_f(y)}' x2='{_f(x1)}' y2='{_f(y)}' "
            f"stroke='#e5e5e5' stroke-width='1'/>"
        )
        body.append(_text(x0 - 6, y + 4, f"{val:.0f}{unit}", size=10, anchor="end"))


def threshold_trace_svg(
    hr_series: Sequence[Optional[float]],
    epochs: Sequence[SleepWakeEpoch],
    title: str = "Heart rate and moving wake threshold",
) -> str:
    """Per-second HR with the per-epoch threshold and asleep shading."""
    width, height = 960, 320
    x0, x1, y0, y1 = 60, width - 20, 40, height - 30
    n = max(len(hr_series), 1)
    present = [v for v in hr_series if v is not None and v > 0]
    thr_vals = [e.threshold for e in epochs if e.threshold is not None]
    hi = max(present + thr_vals, default=1.0) * 1.05
    lo = 0.0

    def sx(t):
        return x0 + (x1 - x0) * t / n

    def sy(v):
        return y1 - (y1 - y0) * (v - lo) / (hi - lo)

    body = [_text(x0, 22, title, size=14, color="#111111")]
    _hline_labels(body, x0, x1, y0, y1, lo, hi, " bpm")

    for e in epochs:
        if e.state is WakeState.ASLEEP:
            body.append(
                f"<rect x='{_f(sx(e.start_t))}' y='{_f(y0)}' "
                f"width='{_f(sx(e.start_t + 30) - sx(e.start_t))}' "
                f"height='{_f(y1 - y0)}' fill='#eaf3fb'/>"
            )

    run: list[str] = []
    for t, v in enumerate(hr_series):
        if v is None:
            if len(run) > 1:
                body.append(
                    f"<polyline points='{' '.join(run)}' fill='none' "
                    f"stroke='#c0392b' stroke-width='0.8'/>"
                )
            run = []
        else:
            run.append(f"{_f(sx(t))},{_f(sy(v))}")
    if len(run) > 1:
        body.append(
            f"<polyline points='{' '.join(run)}' fill='none' "
            f"stroke='#c0392b' stroke-width='0.8'/>"
        )

    pts: list[str] = []
    for e in epochs:
        if e.threshold is None:
            if len(pts) > 1:
                body.append(
                    f"<polyline points='{' '.join(pts)}' fill='none' "
                    f"stroke='#2c3e50' stroke-width='1.5'/>"
                )
            pts = []
            continue
        y = _f(sy(e.threshold))
        pts.append(f"{_f(sx(e.start_t))},{y}")
        pts.append(f"{_f(sx(e.start_t + 30))},{y}")
    if len(pts) > 1:
        body.append(
            f"<polyline points='{' '.join(pts)}' fill='none' "
            f"stroke='#2c3e50' stroke-width='1.5'/>"
        )

    body.append(_text(x1, 22, "hr", size=11, anchor="end", color="#c0392b"))
    body.append(_text(x1 - 30, 22, "threshold", size=11, anchor="end", color="#2c3e50"))
    body.append(_text((x0 + x1) / 2, height - 8, "seconds", size=10, anchor="middle"))
    return _svg(width, height, body)


def _hypnogram_panel(body, codes, x0, x1, y0, panel_h, label):
    rows = {int(s): i for i, s in enumerate(_STAGE_ROWS)}
    row_h = panel_h / len(_STAGE_ROWS)
    n = max(len(codes), 1)

    def sx(t):
        return x0 + (x1 - x0) * t / n

    def sy(code):
        return y0 + rows[code] * row_h + row_h / 2

    body.append(_text(x0, y0 - 6, label, size=12, color="#111111"))
    for s in _STAGE_ROWS:
        y = sy(int(s))
        body.append(
            f"<line x1='{_f(x0)}' y1='{_f(y)}' x2='{_f(x1)}' y2='{_f(y)}' "
            f"stroke='#eeeeee' stroke-width='1'/>"
        )
        body.append(_text(x0 - 6, y + 4, s.level_name, size=10, anchor="end"))

    # run-length compression keeps the path small and the bytes stable
    runs: list[tuple[int, int, int]] = []
    for t, c in enumerate(codes):
        c = int(c)
        if runs and runs[-1][2] == c:
            runs[-1] = (runs[-1][0], t + 1, c)
        else:
            runs.append((t, t + 1, c))
    for start, end, code in runs:
        y = _f(sy(code))
        body.append(
            f"<line x1='{_f(sx(start))}' y1='{y}' x2='{_f(sx(end))}' y2='{y}' "
            f"stroke='{_STAGE_COLORS[Stage(code)]}' stroke-width='4'/>"
        )
    for (s1, e1, c1), (s2, e2, c2) in zip(runs, runs[1:]):
        body.append(
            f"<line x1='{_f(sx(s2))}' y1='{_f(sy(c1))}' x2='{_f(sx(s2))}' "
            f"y2='{_f(sy(c2))}' stroke='#b0b0b0' stroke-width='1'/>"
        )


def hypnogram_pair_svg(
    reference: Sequence[int],
    predicted: Sequence[int],
    labels: tuple[str, str] = ("Reference hypnogram", "Predicted hypnogram"),
) -> str:
    """Two stacked per-second hypnograms sharing one time axis."""
    width, height = 960, 380
    x0, x1 = 70, width - 20
    body: list[str] = []
    _hypnogram_panel(body, [int(c) for c in reference], x0, x1, 30, 140, labels[0])
    _hypnogram_panel(body, [int(c) for c in predicted], x0, x1, 210, 140, labels[1])
    body.append(_text((x0 + x1) / 2, height - 8, "seconds", size=10, anchor="middle"))
    return _svg(width, height, body)


def confusion_heatmap_svg(cm, stage_names: Sequence[str]) -> str:
    """4x4 heat map, predicted on rows, true on columns, counts printed."""
    k = len(stage_names)
    cell, x0, y0 = 90, 140, 80
    width, height = x0 + k * cell + 40, y0 + k * cell + 60
    counts = [[int(v) for v in row] for row in cm]
    peak = max(max(row) for row in counts) or 1
    body = [_text(x0, 30, "Stage confusion (rows predicted, columns true)",
                  size=14, color="#111111")]
    for j, name in enumerate(stage_names):
        body.append(_text(x0 + j * cell + cell / 2, y0 - 10, name, size=11, anchor="middle"))
    for i, name in enumerate(stage_names):
        body.append(_text(x0 - 10, y0 + i * cell + cell / 2 + 4, name, size=11, anchor="end"))
    body.append(_text(x0 - 95, y0 + k * cell / 2, "predicted", size=11, anchor="middle"))
    body.append(_text(x0 + k * cell / 2, y0 - 40, "true", size=11, anchor="middle"))
    for i in range(k):
        for j in range(k):
            v = counts[i][j]
            frac = v / peak
            # white -> deep blue ramp
            r = round(255 - 207 * frac)
            g = round(255 - 192 * frac)
            b = round(255 - 145 * frac)
            fill = f"#{r:02x}{g:02x}{b:02x}"
            body.append(
                f"<rect x='{x0 + j * cell}' y='{y0 + i * cell}' width='{cell}' "
                f"height='{cell}' fill='{fill}' stroke='#cccccc'/>"
            )
            color = "#ffffff" if frac > 0.55 else "#222222"
            body.append(
                _text(x0 + j * cell + cell / 2, y0 + i * cell + cell / 2 + 5,
                      str(v), size=13, anchor="middle", color=color)
            )
    return _svg(width, height, body)


def efficiency_box_svg(summary: dict) -> str:
    """Side-by-side box plots of algorithm vs reference sleep efficiency,
    with the per-night points overlaid."""
    width, height = 520, 360
    x0, x1, y0, y1 = 70, width - 30, 50, height - 50
    nights = summary["nights"]
    all_vals = [n["algorithm"] for n in nights] + [n["reference"] for n in nights]
    lo = min(all_vals + [summary["algorithm"]["min"], summary["reference"]["min"]])
    hi = max(all_vals + [summary["algorithm"]["max"], summary["reference"]["max"]])
    pad = max((hi - lo) * 0.1, 0.01)
    lo, hi = lo - pad, hi + pad

    def sy(v):
        return y1 - (y1 - y0) * (v - lo) / (hi - lo)

    body = [_text(x0, 26, "Sleep efficiency per night", size=14, color="#111111")]
    for i in range(5):
        val = lo + (hi - lo) * i / 4
        y = sy(val)
        body.append(
            f"<line x1='{_f(x0)}' y1='{_f(y)}' x2='{_f(x1)}' y2='{_f(y)}' "
            f"stroke='#e5e5e5' stroke-width='1'/>"
        )
        body.append(_text(x0 - 6, y + 4, f"{val:.2f}", size=10, anchor="end"))

    slots = (("algorithm", "#2c7fb8"), ("reference", "#555555"))
    span = (x1 - x0) / len(slots)
    for idx, (key, color) in enumerate(slots):
        stats = summary[key]
        cx = x0 + span * (idx + 0.5)
        half = span * 0.18
        for v in (stats["min"], stats["max"]):
            body.append(
                f"<line x1='{_f(cx - half / 2)}' y1='{_f(sy(v))}' "
                f"x2='{_f(cx + half / 2)}' y2='{_f(sy(v))}' "
                f"stroke='{color}' stroke-width='1.5'/>"
            )
        body.append(
            f"<line x1='{_f(cx)}' y1='{_f(sy(stats['min']))}' x2='{_f(cx)}' "
            f"y2='{_f(sy(stats['q1']))}' stroke='{color}' stroke-width='1.5'/>"
        )
        body.append(
            f"<line x1='{_f(cx)}' y1='{_f(sy(stats['q3']))}' x2='{_f(cx)}' "
            f"y2='{_f(sy(stats['max']))}' stroke='{color}' stroke-width='1.5'/>"
        )
        body.append(
            f"<rect x='{_f(cx - half)}' y='{_f(sy(stats['q3']))}' width='{_f(2 * half)}' "
            f"height='{_f(sy(stats['q1']) - sy(stats['q3']))}' fill='none' "
            f"stroke='{color}' stroke-width='1.5'/>"
        )
        body.append(
            f"<line x1='{_f(cx - half)}' y1='{_f(sy(stats['median']))}' "
            f"x2='{_f(cx + half)}' y2='{_f(sy(stats['median']))}' "
            f"stroke='{color}' stroke-width='2.5'/>"
        )
        for n in nights:
            body.append(
                f"<circle cx='{_f(cx + half * 1.6)}' cy='{_f(sy(n[key]))}' r='2.5' "
                f"fill='{color}' fill-opacity='0.6'/>"
            )
        body.append(_text(cx, y1 + 20, key, size=11, anchor="middle"))

    body.append(
        _text(x1, 26, f"r={summary['r']:.3f} p={summary['p']:.4f}", size=11, anchor="end")
    )
    return _svg(width, height, body)
