"""Plot-ready data for every supported chart kind, plus a standalone SVG
renderer with deterministic byte output (golden-file friendly).

Scatter plots are intentionally absent: overplotting makes them useless
at subsample scale, so the grouped boxplot (gbox) over a discretized
covariate is the sanctioned alternative.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .pump import Frame
from .source import DatasetError

NAN = float("nan")

KINDS = ("hist", "mu", "std", "size", "corr", "box", "gbox", "tstat_bars")

SIGNIFICANT_COLOR = "#d62728"    # pValue < 5
INSIGNIFICANT_COLOR = "#9467bd"
BAR_COLOR = "#1f77b4"


@dataclass(frozen=True)
class PlotSpec:
    """Series data for one chart; `data` layout depends on `kind`.

    hist: {"bin_edges": [...], "counts": [...]}
    mu/std/size: {"groups": [...], "values": [...]}
    corr: {"columns": [...], "matrix": [[...]]}
    box/gbox: {"groups": [{"label", "q1", "med", "q3", "whisker_low",
               "whisker_high", "outliers", "n"}...]}
    tstat_bars: {"names": [...], "tstats": [...], "pvalues": [...]}
    """

    kind: str
    data: dict
    title: str = ""
    xlabel: str = ""
    ylabel: str = ""
    k: int = 0

    def to_json(self) -> dict:
        return {"kind": self.kind, "data": self.data, "title": self.title,
                "xlabel": self.xlabel, "ylabel": self.ylabel, "k": self.k}


def _finite(values) -> np.ndarray:
    v = np.asarray(values, dtype=np.float64)
    return v[np.isfinite(v)]


def build_hist(frame: Frame, column: str, bins: int | None = None) -> PlotSpec:
    """Equal-width histogram over [min, max]; missing cells excluded."""
    values = _finite(frame.numeric(column))
    if len(values) == 0:
        raise DatasetError(f"column {column!r} has no valid cells to histogram")
    counts, edges = np.histogram(values, bins=bins or 30)
    return PlotSpec(kind="hist", k=frame.k, xlabel=column, ylabel="count",
                    title=f"hist of {column}",
                    data={"bin_edges": edges.tolist(), "counts": counts.tolist()})


def _level_sort_key(levels):
    try:
        nums = [float(l) for l in levels]
        return lambda l: (0, float(l))
    except ValueError:
        return lambda l: (1, l)


def _grouped(frame: Frame, g: str):
    """Row indices per level of g, levels sorted ascending (numeric when
    every level parses as a number, else lexicographic)."""
    cells = frame.text(g)
    groups: dict = {}
    missing = []
    for i, c in enumerate(cells):
        if c is None:
            missing.append(i)
        else:
            groups.setdefault(c, []).append(i)
    if not groups:
        raise DatasetError(f"column {g!r} has no non-missing levels")
    order = sorted(groups, key=_level_sort_key(list(groups)))
    return order, groups, missing


def build_group_bar(frame: Frame, y: str | None, g: str, statistic: str) -> PlotSpec:
    """One bar per level of g: mean/std of y within the level, or the
    level's row count (`size`, which also counts the missing group)."""
    if statistic not in ("mu", "std", "size"):
        raise DatasetError(f"unknown bar statistic {statistic!r}")
    order, groups, missing = _grouped(frame, g)
    labels, values = [], []
    if statistic == "size":
        for lvl in order:
            labels.append(lvl)
            values.append(len(groups[lvl]))
        if missing:
            labels.append("nan")
            values.append(len(missing))
        ylabel = "count"
        title = f"size of {g} levels"
    else:
        yv = np.asarray(frame.numeric(y), dtype=np.float64)
        for lvl in order:
            vals = _finite(yv[groups[lvl]])
            labels.append(lvl)
            if len(vals) == 0:
                values.append(None)
            elif statistic == "mu":
                values.append(float(vals.mean()))
            else:
                values.append(float(vals.std()))
        ylabel = f"{statistic} of {y}"
        title = f"{statistic} of {y} by {g}"
    return PlotSpec(kind=statistic, k=frame.k, xlabel=g, ylabel=ylabel, title=title,
                    data={"groups": labels, "values": values})


def _five_number(values: np.ndarray) -> dict:
    q1, med, q3 = (float(q) for q in np.quantile(values, (0.25, 0.5, 0.75)))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = values[(values >= lo_fence) & (values <= hi_fence)]
    wlo = float(inside.min()) if len(inside) else q1
    whi = float(inside.max()) if len(inside) else q3
    outliers = values[(values < wlo) | (values > whi)]
    return {"q1": q1, "med": med, "q3": q3, "whisker_low": wlo, "whisker_high": whi,
            "outliers": sorted(float(v) for v in outliers), "n": int(len(values))}


def build_box(frame: Frame, y: str, x: str | None = None) -> PlotSpec:
    """Five-number boxes of y, whole-column or per level of x."""
    yv = np.asarray(frame.numeric(y), dtype=np.float64)
    groups = []
    if x is None:
        vals = _finite(yv)
        if len(vals) == 0:
            raise DatasetError(f"column {y!r} has no valid cells")
        groups.append({"label": y, **_five_number(vals)})
    else:
        order, idx, _ = _grouped(frame, x)
        for lvl in order:
            vals = _finite(yv[idx[lvl]])
            if len(vals):
                groups.append({"label": lvl, **_five_number(vals)})
        if not groups:
            raise DatasetError(f"column {y!r} has no valid cells in any group")
    return PlotSpec(kind="box", k=frame.k, xlabel=x or "", ylabel=y,
                    title=f"box of {y}" + (f" by {x}" if x else ""),
                    data={"groups": groups})


def build_gbox(frame: Frame, y: str, x: str, groups: int = 10) -> PlotSpec:
    """Grouped boxplot: x discretized into equal-count groups at its
    empirical quantiles (stable tie order), boxes of y per group."""
    if groups < 1:
        raise DatasetError("groups must be >= 1")
    xv = np.asarray(frame.numeric(x), dtype=np.float64)
    yv = np.asarray(frame.numeric(y), dtype=np.float64)
    ok = np.isfinite(xv) & np.isfinite(yv)
    xv, yv = xv[ok], yv[ok]
    if len(xv) == 0:
        raise DatasetError("no complete (x, y) pairs to plot")
    distinct = len(np.unique(xv))
    g = min(groups, distinct, len(xv))
    if g < groups:
        warnings.warn(f"only {distinct} distinct x values; using {g} groups", stacklevel=2)
    order = np.argsort(xv, kind="stable")
    out = []
    for chunk in np.array_split(order, g):
        gx = xv[chunk]
        gy = yv[chunk]
        label = f"[{_fmt(float(gx.min()))}, {_fmt(float(gx.max()))}]"
        out.append({"label": label, **_five_number(gy)})
    return PlotSpec(kind="gbox", k=frame.k, xlabel=x, ylabel=y,
                    title=f"gbox of {y} by {x}", data={"groups": out})


def build_corr_heatmap(columns, matrix, k: int = 0) -> PlotSpec:
    m = np.asarray(matrix, dtype=np.float64)
    cells = [[None if v != v else float(v) for v in row] for row in m.tolist()]
    return PlotSpec(kind="corr", k=k, title="correlation matrix",
                    data={"columns": list(columns), "matrix": cells})


def build_tstat_bars(table, k: int = 0) -> PlotSpec:
    """t statistics per coefficient, flagged significant at pValue < 5."""
    names, tstats, pvalues = [], [], []
    for name, row in table.rows.items():
        names.append(name)
        t = row.tstat
        if t in (math.inf, -math.inf):
            t = math.copysign(1e16, t)
        tstats.append(None if t != t else float(t))
        pvalues.append(None if row.pvalue != row.pvalue else float(row.pvalue))
    return PlotSpec(kind="tstat_bars", k=k, ylabel="tStat", title="coefficient t statistics",
                    data={"names": names, "tstats": tstats, "pvalues": pvalues})


# ---------------------------------------------------------------- SVG rendering

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 40, 70


def _fmt(v: float) -> str:
    return f"{v:.6g}"


def _esc(s: str) -> str:
    return (str(s).replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
            .replace('"', "&quot;"))


class _Svg:
    def __init__(self, title: str):
        self.parts = [
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
            f'viewBox="0 0 {_W} {_H}" font-family="monospace" font-size="11">',
            f'<rect width="{_W}" height="{_H}" fill="white"/>',
            f'<text x="{_W // 2}" y="20" text-anchor="middle" font-size="14">{_esc(title)}</text>',
        ]

    def rect(self, x, y, w, h, color, opacity=1.0):
        self.parts.append(f'<rect x="{_fmt(x)}" y="{_fmt(y)}" width="{_fmt(max(w, 0.0))}" '
                          f'height="{_fmt(max(h, 0.0))}" fill="{color}" '
                          f'fill-opacity="{_fmt(opacity)}" stroke="black" stroke-width="0.5"/>')

    def line(self, x1, y1, x2, y2, color="black", width=1.0):
        self.parts.append(f'<line x1="{_fmt(x1)}" y1="{_fmt(y1)}" x2="{_fmt(x2)}" '
                          f'y2="{_fmt(y2)}" stroke="{color}" stroke-width="{_fmt(width)}"/>')

    def text(self, x, y, s, anchor="middle", angle=None, size=11):
        rotate = f' transform="rotate(-45 {_fmt(x)} {_fmt(y)})"' if angle else ""
        self.parts.append(f'<text x="{_fmt(x)}" y="{_fmt(y)}" text-anchor="{anchor}" '
                          f'font-size="{size}"{rotate}>{_esc(s)}</text>')

    def circle(self, x, y, r=2.0, color="black"):
        self.parts.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(y)}" r="{_fmt(r)}" '
                          f'fill="none" stroke="{color}" stroke-width="0.8"/>')

    def done(self) -> str:
        return "\n".join(self.parts + ["</svg>"]) + "\n"


class _YScale:
    def __init__(self, lo: float, hi: float):
        if hi <= lo:
            hi = lo + 1.0
        pad = 0.05 * (hi - lo)
        self.lo, self.hi = lo - pad, hi + pad

    def y(self, v: float) -> float:
        frac = (v - self.lo) / (self.hi - self.lo)
        return _H - _MB - frac * (_H - _MT - _MB)

    def ticks(self, n=5):
        step = (self.hi - self.lo) / (n - 1)
        return [self.lo + i * step for i in range(n)]


def _axes(svg: _Svg, scale: _YScale, xlabel: str, ylabel: str):
    svg.line(_ML, _MT, _ML, _H - _MB)
    svg.line(_ML, _H - _MB, _W - _MR, _H - _MB)
    for t in scale.ticks():
        y = scale.y(t)
        svg.line(_ML - 4, y, _ML, y)
        svg.text(_ML - 8, y + 4, _fmt(t), anchor="end", size=10)
    if xlabel:
        svg.text((_ML + _W - _MR) / 2, _H - 8, xlabel)
    if ylabel:
        svg.text(14, _MT - 10, ylabel, anchor="start", size=10)


def _empty(svg: _Svg, xlabel: str, ylabel: str) -> str:
    scale = _YScale(0.0, 1.0)
    _axes(svg, scale, xlabel, ylabel)
    svg.text((_ML + _W - _MR) / 2, (_MT + _H - _MB) / 2, "no data")
    return svg.done()


def _slot(i: int, count: int):
    width = (_W - _ML - _MR) / count
    return _ML + i * width, width


def _render_bars(svg: _Svg, labels, values, colors, ylabel: str, xlabel: str) -> str:
    numeric = [v for v in values if v is not None]
    if not numeric:
        return _empty(svg, xlabel, ylabel)
    scale = _YScale(min(0.0, min(numeric)), max(0.0, max(numeric)))
    _axes(svg, scale, xlabel, ylabel)
    y0 = scale.y(0.0)
    for i, (label, v) in enumerate(zip(labels, values)):
        x, width = _slot(i, len(labels))
        if v is not None:
            top = scale.y(v)
            svg.rect(x + 0.15 * width, min(top, y0), 0.7 * width, abs(top - y0), colors[i])
        svg.text(x + width / 2, _H - _MB + 14, label, angle=len(labels) > 8, size=9)
    svg.line(_ML, y0, _W - _MR, y0)
    return svg.done()


def _render_boxes(svg: _Svg, groups, ylabel: str, xlabel: str) -> str:
    if not groups:
        return _empty(svg, xlabel, ylabel)
    lo = min(min(g["outliers"], default=g["whisker_low"]) for g in groups)
    hi = max(max(g["outliers"], default=g["whisker_high"]) for g in groups)
    lo = min(lo, min(g["whisker_low"] for g in groups))
    hi = max(hi, max(g["whisker_high"] for g in groups))
    scale = _YScale(lo, hi)
    _axes(svg, scale, xlabel, ylabel)
    for i, g in enumerate(groups):
        x, width = _slot(i, len(groups))
        cx = x + width / 2
        bl, bw = x + 0.2 * width, 0.6 * width
        svg.line(cx, scale.y(g["whisker_low"]), cx, scale.y(g["q1"]))
        svg.line(cx, scale.y(g["q3"]), cx, scale.y(g["whisker_high"]))
        svg.line(cx - 0.2 * width, scale.y(g["whisker_low"]), cx + 0.2 * width,
                 scale.y(g["whisker_low"]))
        svg.line(cx - 0.2 * width, scale.y(g["whisker_high"]), cx + 0.2 * width,
                 scale.y(g["whisker_high"]))
        svg.rect(bl, scale.y(g["q3"]), bw, scale.y(g["q1"]) - scale.y(g["q3"]),
                 BAR_COLOR, opacity=0.35)
        svg.line(bl, scale.y(g["med"]), bl + bw, scale.y(g["med"]), width=1.5)
        for v in g["outliers"][:200]:
            svg.circle(cx, scale.y(v))
        svg.text(cx, _H - _MB + 14, g["label"], angle=len(groups) > 6, size=9)
    return svg.done()


def _corr_color(v: float) -> str:
    # -1 -> blue, 0 -> white, +1 -> red
    v = max(-1.0, min(1.0, v))
    if v >= 0:
        other = int(round(255 * (1 - v)))
        return f"#ff{other:02x}{other:02x}"
    other = int(round(255 * (1 + v)))
    return f"#{other:02x}{other:02x}ff"


def render_svg(spec: PlotSpec) -> str:
    """Standalone deterministic SVG for a PlotSpec."""
    if spec.kind not in KINDS:
        raise DatasetError(f"unsupported plot kind: {spec.kind!r}")
    svg = _Svg(spec.title or spec.kind)
    if spec.kind == "hist":
        edges = spec.data["bin_edges"]
        counts = spec.data["counts"]
        if not counts or sum(counts) == 0:
            return _empty(svg, spec.xlabel, spec.ylabel)
        scale = _YScale(0.0, max(counts))
        _axes(svg, scale, spec.xlabel, spec.ylabel)
        span = edges[-1] - edges[0] or 1.0
        for i, c in enumerate(counts):
            x0 = _ML + (edges[i] - edges[0]) / span * (_W - _ML - _MR)
            x1 = _ML + (edges[i + 1] - edges[0]) / span * (_W - _ML - _MR)
            svg.rect(x0, scale.y(c), x1 - x0, scale.y(0.0) - scale.y(c), BAR_COLOR)
        svg.text(_ML, _H - _MB + 14, _fmt(edges[0]), size=9)
        svg.text(_W - _MR, _H - _MB + 14, _fmt(edges[-1]), anchor="end", size=9)
        return svg.done()
    if spec.kind in ("mu", "std", "size"):
        labels = spec.data["groups"]
        values = spec.data["values"]
        if not labels:
            return _empty(svg, spec.xlabel, spec.ylabel)
        return _render_bars(svg, labels, values, [BAR_COLOR] * len(labels),
                            spec.ylabel, spec.xlabel)
    if spec.kind in ("box", "gbox"):
        return _render_boxes(svg, spec.data["groups"], spec.ylabel, spec.xlabel)
    if spec.kind == "tstat_bars":
        names = spec.data["names"]
        tstats = [None if t is None else max(-1e3, min(1e3, t)) for t in spec.data["tstats"]]
        pvals = spec.data["pvalues"]
        if not names:
            return _empty(svg, spec.xlabel, spec.ylabel)
        colors = [SIGNIFICANT_COLOR if (p is not None and p < 5.0) else INSIGNIFICANT_COLOR
                  for p in pvals]
        return _render_bars(svg, names, tstats, colors, spec.ylabel, spec.xlabel)
    # corr heatmap
    cols = spec.data["columns"]
    matrix = spec.data["matrix"]
    if not cols:
        return _empty(svg, spec.xlabel, spec.ylabel)
    p = len(cols)
    side = min((_W - _ML - _MR) / p, (_H - _MT - _MB) / p)
    for i in range(p):
        for j in range(p):
            v = matrix[i][j]
            color = "#cccccc" if v is None else _corr_color(v)
            svg.rect(_ML + j * side, _MT + i * side, side, side, color)
            if v is not None and p <= 12:
                svg.text(_ML + j * side + side / 2, _MT + i * side + side / 2 + 4,
                         f"{v:.2f}", size=9)
    for i, name in enumerate(cols):
        svg.text(_ML - 6, _MT + i * side + side / 2 + 4, name, anchor="end", size=9)
        svg.text(_ML + i * side + side / 2, _MT + p * side + 12, name, angle=True, size=9)
    return svg.done()
