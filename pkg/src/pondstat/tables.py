"""Fixed-width text tables for the CLI/REPL, rendered from the same JSON
emission payloads the service streams: stats columns Mu SE Std Min Med
Max Skew Kurt mp, regression columns Estimate StandErr tStat pValue,
with short footnote glossaries."""

from __future__ import annotations

import json
import math

STATS_COLUMNS = ("Mu", "SE", "Std", "Min", "Med", "Max", "Skew", "Kurt", "mp")
_STATS_FMT = {"mu": "%.2f", "se": "%.2f", "std": "%.2f", "min": "%.1f", "med": "%.1f",
              "max": "%.1f", "skew": "%.2f", "kurt": "%.2f", "mp": "%.1f"}

RESERVED_KEYS = {"k", "n", "elapsed_s", "task_id", "state", "terminal", "error",
                 "replicates"}

STATS_GLOSSARY = (
    "* Mu: mean of the replicate subsample means;",
    "* SE: standard error of Mu, shown multiplied by 100;",
    "* Std: mean of the replicate subsample standard deviations;",
    "* Min/Med/Max: min of minima / median of medians / max of maxima;",
    "* Skew: mean replicate skewness;",
    "* Kurt: mean replicate non-central kurtosis (m4/m2^2);",
    "* mp: mean replicate missing percentage (parse failures included).",
)

MODEL_GLOSSARY = (
    "* Estimate: mean of the replicate estimates (original x scale);",
    "* StandErr: sd of the replicate estimates / sqrt(K), shown multiplied by 100;",
    "* tStat: Estimate / (StandErr/100);",
    "* pValue: two-sided normal-approximation p-value, shown multiplied by 100.",
)


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _cell(value, fmt: str) -> str:
    if value is None:
        return "nan"
    if isinstance(value, float) and not math.isfinite(value):
        return "nan" if value != value else ("inf" if value > 0 else "-inf")
    return fmt % value


def _name(name: str, width: int = 10) -> str:
    return name if len(name) <= width else name[: width - 3] + "..."


def _layout(header, rows):
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(header)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(header, widths)).rstrip()]
    for r in rows:
        lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)).rstrip())
    return lines


def stats_columns_of(emission: dict):
    return [c for c in emission if c not in RESERVED_KEYS]


def render_stats(emission: dict, glossary: bool = False) -> str:
    """emission: {column: {mu, se, ...}, k, n, ...} (the stats JSON table)."""
    header = ("",) + STATS_COLUMNS
    rows = []
    for name in stats_columns_of(emission):
        stat = emission[name]
        cells = [_name(name).ljust(10)]
        for col in STATS_COLUMNS:
            key = col.lower()
            cells.append(_cell(stat.get(key), _STATS_FMT[key]))
        rows.append(cells)
    lines = _layout(header, rows)
    if glossary:
        lines += ["", *STATS_GLOSSARY]
    return "\n".join(lines)


def render_freq(emission: dict) -> str:
    lines = [f"{emission['total']} counts.", "",
             f"[ 0 ] No. of levels detected for * {emission['variable']} * is: "
             f"{emission['levels_discovered']}"]
    for row in emission.get("levels", []):
        lines.append(f"{row['level']} = {row['pct']:.2f}")
    if emission.get("capped"):
        lines.append("*** Note: only top 100 levels displayed...")
    return "\n".join(lines)


def render_regression(emission: dict, glossary: bool = False) -> str:
    (metric_name, metric), = emission["metric"].items()
    label = "R.Squared" if metric_name == "r_squared" else "The out-of-sample AUC"
    metric_line = f"{label} = nan" if metric is None else f"{label} = {metric * 100:.1f} %"
    header = ("", "Estimate", "StandErr", "tStat", "pValue")
    rows = []
    for name, row in emission["coefficients"].items():
        rows.append([_name(name, 18).ljust(18), _cell(row["estimate"], "%.3f"),
                     _cell(row["standerr"], "%.3f"), _cell(row["tstat"], "%.3f"),
                     _cell(row["pvalue"], "%.3f")])
    lines = [metric_line, ""] + _layout(header, rows)
    if emission.get("discarded"):
        lines.append(f"({emission['discarded']} replicate(s) discarded)")
    if glossary:
        lines += ["", *MODEL_GLOSSARY]
    return "\n".join(lines)


def render_corr(emission: dict) -> str:
    cols = emission["columns"]
    header = ("",) + tuple(_name(c) for c in cols)
    rows = []
    for name, row in zip(cols, emission["matrix"]):
        rows.append([_name(name).ljust(10)] + [_cell(v, "%.3f") for v in row])
    return "\n".join(_layout(header, rows))


def render_emission(kind: str, emission: dict, glossary: bool = False) -> str:
    if emission.get("terminal"):
        line = f"[{emission.get('task_id', '?')}] {emission['state']} after k={emission['k']}"
        if emission.get("error"):
            line += f": {emission['error']}"
        return line
    if kind == "stats":
        return render_stats(emission, glossary)
    if kind == "table":
        return render_freq(emission)
    if kind == "corr":
        return render_corr(emission)
    if kind in ("ols", "logit"):
        return render_regression(emission, glossary)
    if kind == "plot":
        spec = emission.get("plot", {})
        return f"[plot {spec.get('kind')}] k={emission.get('k')} ready"
    return canonical_json(emission)
