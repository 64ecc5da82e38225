"""Deterministic SVG figures for relevance traces and analysis summaries.

All coordinates are written with fixed precision and elements are emitted in
a fixed order, so a figure is a pure function of its inputs.
"""

import math
from html import escape

import numpy as np

from .signal.ecg import LEAD_NAMES

FIGURE_KINDS = ("trace-heatmap", "class-histogram", "recording-boxplots", "lead-boxplots",
                "beat-average")

BLUE = (33, 102, 172)
GREY = (190, 190, 190)
RED = (178, 24, 43)
COLOR_STEPS = 10  # quantization levels per side of zero
DEFAULT_UPSAMPLE = 5

CLASS_COLORS = {"Normal": "#1b9e77", "AF": "#d95f02", "LBBB": "#7570b3"}
FONT = "DejaVu Sans, Arial, sans-serif"


class RenderError(RuntimeError):
    """A figure could not be produced from the given inputs."""


# ---- colour -----------------------------------------------------------------------

def color_position(values, scale):
    """Map relevance to [-1, 1] by ``scale`` (values beyond are clipped)."""
    v = np.asarray(values, dtype=np.float64)
    if scale <= 0:
        return np.zeros_like(v)
    return np.clip(v / scale, -1.0, 1.0)


def lead_color_positions(relevance, per_lead=True):
    """Colour positions for a ``(samples, leads)`` relevance grid.

    Each lead is divided by its own maximum absolute value when
    ``per_lead``; otherwise by the global one. Zero always maps to zero.
    """
    r = np.asarray(relevance, dtype=np.float64)
    if per_lead:
        scale = np.max(np.abs(r), axis=0)
        safe = np.where(scale > 0, scale, 1.0)
        return np.clip(r / safe, -1.0, 1.0)
    return color_position(r, float(np.max(np.abs(r))) if r.size else 0.0)


def quantize(position, steps=COLOR_STEPS):
    """Nearest of the ``2 * steps + 1`` symmetric colour levels, as an integer."""
    return np.rint(np.asarray(position, dtype=np.float64) * steps).astype(int)


def diverging_color(position) -> str:
    """Blue (-1) through grey (0) to red (+1), as ``#rrggbb``."""
    p = float(np.clip(position, -1.0, 1.0))
    end = RED if p >= 0 else BLUE
    a = abs(p)
    rgb = [int(round(g + a * (e - g))) for g, e in zip(GREY, end)]
    return "#{:02x}{:02x}{:02x}".format(*rgb)


def level_color(level, steps=COLOR_STEPS) -> str:
    return diverging_color(level / steps)


def upsample(values, factor=DEFAULT_UPSAMPLE):
    """Linear interpolation to ``(n - 1) * factor + 1`` points along axis 0."""
    v = np.asarray(values, dtype=np.float64)
    n = v.shape[0]
    if factor <= 1 or n < 2:
        return v.copy()
    t = np.arange((n - 1) * factor + 1) / factor
    lo = np.minimum(np.floor(t).astype(int), n - 2)
    frac = t - lo
    if v.ndim > 1:
        frac = frac.reshape((-1,) + (1,) * (v.ndim - 1))
    return v[lo] * (1.0 - frac) + v[lo + 1] * frac


# ---- svg builder ------------------------------------------------------------------

def _f(x) -> str:
    s = f"{x:.2f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


class Svg:
    def __init__(self, width, height, title=None):
        self.width, self.height = width, height
        self.parts = []
        if title:
            self.text(width / 2, 20, title, size=14, anchor="middle")

    def add(self, element):
        self.parts.append(element)

    def line(self, x1, y1, x2, y2, stroke="#000000", width=1.0, dash=None):
        d = f' stroke-dasharray="{dash}"' if dash else ""
        self.add(f'<line x1="{_f(x1)}" y1="{_f(y1)}" x2="{_f(x2)}" y2="{_f(y2)}" '
                 f'stroke="{stroke}" stroke-width="{_f(width)}"{d}/>')

    def rect(self, x, y, w, h, fill="none", stroke="#000000", width=1.0):
        self.add(f'<rect x="{_f(x)}" y="{_f(y)}" width="{_f(w)}" height="{_f(h)}" '
                 f'fill="{fill}" stroke="{stroke}" stroke-width="{_f(width)}"/>')

    def polyline(self, xs, ys, stroke="#000000", width=1.0):
        pts = " ".join(f"{_f(x)},{_f(y)}" for x, y in zip(xs, ys))
        self.add(f'<polyline points="{pts}" fill="none" stroke="{stroke}" '
                 f'stroke-width="{_f(width)}"/>')

    def path(self, d, stroke="none", fill="none", width=1.0, extra=""):
        self.add(f'<path d="{d}" fill="{fill}" stroke="{stroke}" '
                 f'stroke-width="{_f(width)}"{extra}/>')

    def text(self, x, y, s, size=11, anchor="start", rotate=None, color="#000000"):
        rot = f' transform="rotate({_f(rotate)} {_f(x)} {_f(y)})"' if rotate else ""
        self.add(f'<text x="{_f(x)}" y="{_f(y)}" font-family="{FONT}" font-size="{size}" '
                 f'text-anchor="{anchor}" fill="{color}"{rot}>{escape(str(s))}</text>')

    def render(self) -> str:
        head = (f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" '
                f'height="{self.height}" viewBox="0 0 {self.width} {self.height}">\n'
                f'<rect width="{self.width}" height="{self.height}" fill="#ffffff"/>\n')
        return head + "\n".join(self.parts) + "\n</svg>\n"


def nice_ticks(lo, hi, n=5):
    """Round tick values covering ``[lo, hi]``."""
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return [0.0]
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(n, 1)
    mag = 10 ** math.floor(math.log10(raw))
    step = min((m * mag for m in (1, 2, 2.5, 5, 10) if m * mag >= raw), default=10 * mag)
    start = math.ceil(lo / step - 1e-9) * step
    ticks = []
    t = start
    while t <= hi + 1e-9 * step:
        ticks.append(round(t, 12))
        t += step
    return ticks


def _tick_label(v) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e-3 and abs(v) < 1e5:
        return f"{v:.6g}"
    return f"{v:.1e}"


class Axes:
    """Linear mapping of a data box onto a pixel box."""

    def __init__(self, svg, x0, y0, w, h, xlim, ylim):
        self.svg, self.x0, self.y0, self.w, self.h = svg, x0, y0, w, h
        self.xlim = _widen(xlim)
        self.ylim = _widen(ylim)

    def x(self, v):
        lo, hi = self.xlim
        return self.x0 + (np.asarray(v, dtype=float) - lo) / (hi - lo) * self.w

    def y(self, v):
        lo, hi = self.ylim
        return self.y0 + self.h - (np.asarray(v, dtype=float) - lo) / (hi - lo) * self.h

    def frame(self, xlabel=None, ylabel=None, xticks=True, yticks=True):
        s = self.svg
        s.rect(self.x0, self.y0, self.w, self.h)
        if xticks:
            for t in nice_ticks(*self.xlim):
                px = float(self.x(t))
                s.line(px, self.y0 + self.h, px, self.y0 + self.h + 4)
                s.text(px, self.y0 + self.h + 15, _tick_label(t), size=9, anchor="middle")
        if yticks:
            for t in nice_ticks(*self.ylim):
                py = float(self.y(t))
                s.line(self.x0 - 4, py, self.x0, py)
                s.text(self.x0 - 6, py + 3, _tick_label(t), size=9, anchor="end")
        if xlabel:
            s.text(self.x0 + self.w / 2, self.y0 + self.h + 30, xlabel, anchor="middle")
        if ylabel:
            s.text(self.x0 - 45, self.y0 + self.h / 2, ylabel, anchor="middle", rotate=-90)


def _widen(lim):
    lo, hi = float(lim[0]), float(lim[1])
    if not (math.isfinite(lo) and math.isfinite(hi)):
        return -1.0, 1.0
    if hi <= lo:
        pad = abs(lo) * 0.1 if lo != 0 else 1.0
        return lo - pad, hi + pad
    return lo, hi


def _colored_markers(svg, xs, ys, positions, size=1.2):
    """Markers grouped into one path per colour level, levels in fixed order."""
    levels = quantize(positions)
    h = size / 2
    for level in range(-COLOR_STEPS, COLOR_STEPS + 1):
        sel = np.nonzero(levels == level)[0]
        if sel.size == 0:
            continue
        d = "".join(f"M{_f(xs[i] - h)} {_f(ys[i])}h{_f(size)}" for i in sel)
        svg.path(d, stroke=level_color(level), width=size,
                 extra=f' data-level="{level}"')


def _legend(svg, x, y, labels):
    for i, label in enumerate(labels):
        color = CLASS_COLORS.get(label, "#333333")
        svg.rect(x, y + 16 * i - 9, 10, 10, fill=color, stroke=color)
        svg.text(x + 15, y + 16 * i, label, size=10)


# ---- figures ----------------------------------------------------------------------

def trace_heatmap(samples, relevance, title=None, per_lead=True, factor=DEFAULT_UPSAMPLE,
                  lead_names=LEAD_NAMES, sample_rate=400.0) -> str:
    """Every lead as a scatter of (upsampled) samples coloured by relevance."""
    x = np.asarray(samples, dtype=np.float64)
    r = np.asarray(relevance, dtype=np.float64)
    if x.shape != r.shape or x.ndim != 2:
        raise RenderError(f"signal shape {x.shape} and relevance shape {r.shape} differ")
    n, leads = x.shape
    pos = lead_color_positions(r, per_lead)
    xu, pu = upsample(x, factor), upsample(pos, factor)
    row_h, left, width = 70, 60, 1100
    svg = Svg(left + width + 20, 40 + row_h * leads + 40, title)
    t = np.arange(xu.shape[0]) / (factor if factor > 1 else 1)
    px = left + t / max(n - 1, 1) * width
    for k in range(leads):
        top = 35 + k * row_h
        amp = float(np.max(np.abs(x[:, k])))
        scale = (row_h * 0.45) / amp if amp > 0 else 0.0
        py = top + row_h / 2 - xu[:, k] * scale
        svg.text(left - 8, top + row_h / 2 + 4, lead_names[k], anchor="end")
        svg.line(left, top + row_h / 2, left + width, top + row_h / 2, stroke="#e0e0e0",
                 width=0.5)
        _colored_markers(svg, px, py, pu[:, k])
    bottom = 35 + leads * row_h
    for sec in nice_ticks(0, (n - 1) / sample_rate, 10):
        xx = left + sec * sample_rate / max(n - 1, 1) * width
        svg.line(xx, bottom, xx, bottom + 4)
        svg.text(xx, bottom + 15, _tick_label(sec), size=9, anchor="middle")
    svg.text(left + width / 2, bottom + 30, "time (s)", anchor="middle")
    return svg.render()


def class_histogram_figure(edges, counts: dict, title=None) -> str:
    """Per-class step histograms on shared bin edges."""
    edges = np.asarray(edges, dtype=np.float64)
    labels = sorted(counts)
    if not labels:
        raise RenderError("no histogram classes")
    svg = Svg(760, 460, title)
    ymax = max(float(np.max(counts[k])) for k in labels)
    ax = Axes(svg, 80, 40, 600, 350, (edges[0], edges[-1]), (0, ymax * 1.05 or 1.0))
    for label in labels:
        c = np.asarray(counts[label], dtype=float)
        xs = np.repeat(edges, 2)[1:-1]
        ys = np.repeat(c, 2)
        svg.polyline(ax.x(xs), ax.y(ys), stroke=CLASS_COLORS.get(label, "#333333"), width=1.2)
    ax.frame("relevance score", "count")
    _legend(svg, 690, 60, labels)
    return svg.render()


def _box(svg, ax, xc, half, stats, color, vertical=True):
    q1, med, q3 = ax.y(stats["q1"]), ax.y(stats["median"]), ax.y(stats["q3"])
    lo, hi = ax.y(stats["whisker_low"]), ax.y(stats["whisker_high"])
    svg.rect(xc - half, float(q3), 2 * half, max(float(q1 - q3), 0.0), fill=color,
             stroke="#222222", width=0.6)
    svg.line(xc - half, float(med), xc + half, float(med), stroke="#000000", width=1.0)
    svg.line(xc, float(q1), xc, float(lo), stroke="#222222", width=0.6)
    svg.line(xc, float(q3), xc, float(hi), stroke="#222222", width=0.6)
    svg.line(xc - half / 2, float(lo), xc + half / 2, float(lo), stroke="#222222", width=0.6)
    svg.line(xc - half / 2, float(hi), xc + half / 2, float(hi), stroke="#222222", width=0.6)


def _logit(p):
    p = min(max(p, 1e-12), 1 - 1e-12)
    return math.log(p / (1 - p))


def recording_boxplots_figure(records, title=None) -> str:
    """One boxplot of each recording's relevance values, placed at its probability.

    ``records`` items need ``probability``, ``predicted``, ``label``,
    ``target`` (the interrogated class), ``mean`` and ``box`` (boxplot
    stats dict). The top axis shows the linear score of the bottom axis
    probability. Positive predictions are orange, negative ones green;
    false negatives carry a red cross.
    """
    if not records:
        raise RenderError("no recordings to plot")
    svg = Svg(1000, 480, title)
    lows = [r["box"]["whisker_low"] for r in records]
    highs = [r["box"]["whisker_high"] for r in records]
    ax = Axes(svg, 80, 60, 820, 340, (0.0, 1.0), (min(lows), max(highs)))
    for r in sorted(records, key=lambda r: (r["probability"], r["id"])):
        xc = float(ax.x(r["probability"]))
        color = "#d95f02" if r["predicted"] else "#1b9e77"
        _box(svg, ax, xc, 2.0, r["box"], color)
        my = float(ax.y(r["mean"]))
        svg.path(f"M{_f(xc - 2)} {_f(my)}h4", stroke="#000000", width=1.5)
        if r["label"] == r["target"] and not r["predicted"]:
            top = float(ax.y(r["box"]["whisker_high"])) - 6
            svg.path(f"M{_f(xc - 3)} {_f(top - 3)}l6 6M{_f(xc - 3)} {_f(top + 3)}l6 -6",
                     stroke="#e41a1c", width=1.2)
    ax.frame("sigmoid output C_n", "relevance score")
    # upper axis: linear score at the same positions
    for v in (-6, -4, -2, 0, 2, 4, 6):
        p = 1.0 / (1.0 + math.exp(-v))
        px = float(ax.x(p))
        svg.line(px, ax.y0, px, ax.y0 - 4)
        svg.text(px, ax.y0 - 7, str(v), size=9, anchor="middle")
    svg.text(ax.x0 + ax.w / 2, ax.y0 - 22, "linear output", anchor="middle")
    return svg.render()


def lead_boxplots_figure(lead_stats: dict, title=None, lead_names=LEAD_NAMES) -> str:
    """Boxplots of per-lead means, one box per class in each lead group.

    ``lead_stats`` maps class label to a list of 12 boxplot stats dicts.
    """
    labels = sorted(lead_stats)
    if not labels:
        raise RenderError("no classes for lead boxplots")
    svg = Svg(1000, 460, title)
    allv = [s[key] for lab in labels for s in lead_stats[lab]
            for key in ("whisker_low", "whisker_high")]
    n_leads = len(lead_names)
    ax = Axes(svg, 90, 40, 800, 340, (0, n_leads), (min(allv), max(allv)))
    width = 0.8 / len(labels)
    for k in range(n_leads):
        for j, lab in enumerate(labels):
            xc = float(ax.x(k + 0.1 + width * (j + 0.5)))
            _box(svg, ax, xc, width * ax.w / n_leads * 0.4, lead_stats[lab][k],
                 CLASS_COLORS.get(lab, "#999999"))
        svg.text(float(ax.x(k + 0.5)), ax.y0 + ax.h + 15, lead_names[k], size=10,
                 anchor="middle")
    ax.frame(None, "mean relevance per lead", xticks=False)
    _legend(svg, 900, 60, labels)
    return svg.render()


def beat_average_figure(panels, title=None, factor=DEFAULT_UPSAMPLE) -> str:
    """Average beats with relevance-coloured markers (left) and relevance variance (right).

    ``panels`` is a list of dicts with ``label``, ``beat`` (normalized mean
    beat), ``relevance`` (normalized mean relevance) and ``variance``.
    """
    if not panels:
        raise RenderError("no beat averages to plot")
    row_h = 220
    svg = Svg(1000, 40 + row_h * len(panels) + 20, title)
    for i, p in enumerate(panels):
        top = 40 + i * row_h
        beat = np.asarray(p["beat"], dtype=float)
        rel = np.asarray(p["relevance"], dtype=float)
        var = np.asarray(p["variance"], dtype=float)
        n = beat.size
        left = Axes(svg, 70, top, 400, row_h - 60, (0, n - 1), (-1.05, 1.05))
        bu, ru = upsample(beat, factor), upsample(rel, factor)
        t = np.arange(bu.size) / (factor if factor > 1 and n > 1 else 1)
        _colored_markers(svg, left.x(t), left.y(bu), color_position(ru, 1.0), size=2.0)
        svg.polyline(left.x(np.arange(n)), left.y(beat), stroke="#000000", width=1.0)
        left.frame("offset (samples)", f"{p['label']} (normalized)")
        vmax = float(var.max()) if var.size else 0.0
        right = Axes(svg, 560, top, 400, row_h - 60, (0, n - 1), (0.0, vmax * 1.05 or 1.0))
        svg.polyline(right.x(np.arange(n)), right.y(var), stroke="#ff7f00", width=1.2)
        right.frame("offset (samples)", "relevance variance")
    return svg.render()
