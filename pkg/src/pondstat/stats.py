"""Descriptive statistics: per-replicate moments, cross-replicate
aggregation with standard errors, frequency tables, correlations, and
the variance forecast used to size subsampling tasks.

Aggregation state keeps one small summary per replicate, so merging is
order-independent (the table is recomputed from summaries sorted by
replicate index) and memory stays O(K), never O(nK).
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .pump import Frame, SamplingPlan, draw, resolve_roles
from .source import QUANTITATIVE, DatasetError, DatasetHandle, INTERCEPT
from .transform import TransformProgram, apply_program, compile_expr, parse_expr

NAN = float("nan")


@dataclass(frozen=True)
class MomentSet:
    """One column's single-replicate summary (central 1/n moments)."""

    count_valid: int
    mean: float
    m2: float
    m3: float
    m4: float
    min: float
    median: float
    max: float
    missing_count: int
    n_rows: int

    @property
    def std(self) -> float:
        return math.sqrt(self.m2) if self.count_valid else NAN

    @property
    def skew(self) -> float:
        if not self.count_valid:
            return NAN
        return self.m3 / self.m2 ** 1.5 if self.m2 > 0 else 0.0

    @property
    def kurt(self) -> float:
        """Pearson (non-excess) kurtosis m4/m2^2; 0 by convention when degenerate."""
        if not self.count_valid:
            return NAN
        return self.m4 / (self.m2 * self.m2) if self.m2 > 0 else 0.0

    @property
    def mp(self) -> float:
        return 100.0 * self.missing_count / self.n_rows if self.n_rows else NAN


def moments_from_values(values: np.ndarray, n_rows: int | None = None) -> MomentSet:
    values = np.asarray(values, dtype=np.float64)
    if n_rows is None:
        n_rows = len(values)
    cnt, mean, m2, m3, m4, mn, mx = _kernels.moment_sweep(values)
    med = float(np.median(values[np.isfinite(values)])) if cnt else NAN
    return MomentSet(count_valid=cnt, mean=mean, m2=m2, m3=m3, m4=m4, min=mn,
                     median=med, max=mx, missing_count=n_rows - cnt, n_rows=n_rows)


def column_moments(frame: Frame, column: str) -> MomentSet:
    """Moments of a quantitative frame column over its non-missing cells."""
    if not frame.is_quant(column):
        if column in frame.qual:
            raise DatasetError(f"column {column!r} is qualitative; no moments")
        raise DatasetError(f"column not in frame: {column!r}")
    return moments_from_values(frame.quant[column], frame.n_rows)


@dataclass(frozen=True)
class StatRow:
    """One display row of the stats table (SE and mp in display units)."""

    mu: float
    se: float
    std: float
    min: float
    med: float
    max: float
    skew: float
    kurt: float
    mp: float

    def to_json(self) -> dict:
        return {f: _json_num(getattr(self, f)) for f in
                ("mu", "se", "std", "min", "med", "max", "skew", "kurt", "mp")}


def _json_num(v):
    if v is None or v != v or v in (math.inf, -math.inf):
        return None
    return v


def _mean(xs) -> float:
    return sum(xs) / len(xs) if xs else NAN


class StatsAggregate:
    """Cross-replicate aggregation for a fixed column list."""

    def __init__(self, columns, n: int):
        self.columns = list(columns)
        self.n = n
        self._reps: dict = {}  # k -> {column: MomentSet}

    @property
    def k_completed(self) -> int:
        return len(self._reps)

    def add_replicate(self, k: int, moments: dict) -> None:
        if k in self._reps:
            raise ValueError(f"replicate {k} already merged")
        self._reps[k] = moments

    def row(self, column: str) -> StatRow:
        k = self.k_completed
        reps = [self._reps[i][column] for i in sorted(self._reps)]
        defined = [m for m in reps if m.count_valid > 0]
        if not defined:
            mp = _mean([m.mp for m in reps]) if reps else NAN
            return StatRow(NAN, NAN, NAN, NAN, NAN, NAN, NAN, NAN, mp)
        std_avg = _mean([m.std for m in defined])
        se = 100.0 * std_avg / math.sqrt(self.n * k)
        return StatRow(
            mu=_mean([m.mean for m in defined]),
            se=se,
            std=std_avg,
            min=min(m.min for m in defined),
            med=float(np.median([m.median for m in defined])),
            max=max(m.max for m in defined),
            skew=_mean([m.skew for m in defined]),
            kurt=_mean([m.kurt for m in defined]),
            mp=_mean([m.mp for m in reps]),
        )

    def table(self) -> dict:
        return {c: self.row(c) for c in self.columns}

    def to_json(self, elapsed_s=None) -> dict:
        out = {c: r.to_json() for c, r in self.table().items()}
        out["k"] = self.k_completed
        out["n"] = self.n
        if elapsed_s is not None:
            out["elapsed_s"] = elapsed_s
        return out


def replicate_stat_moments(frame: Frame, columns) -> dict:
    """Per-column MomentSet for one frame; text columns get a numeric
    parse attempt first (failures count into mp)."""
    out = {}
    for c in columns:
        out[c] = moments_from_values(frame.numeric(c), frame.n_rows)
    return out


def resolve_stat_columns(handle: DatasetHandle, columns=None, program=None):
    """Requested stats columns against the post-transform column set.

    None means every quantitative schema column. Explicit requests may
    name any non-dropped column (text columns are numerically attempted,
    reproducing the mp triage semantics).
    """
    from .transform import simulate_roles

    roles = resolve_roles(handle)
    after = simulate_roles(program, roles)
    if columns is None:
        cols = [c for c, r in after.items() if r == QUANTITATIVE]
        if not cols:
            raise DatasetError("no quantitative columns in schema; pass columns explicitly")
        return cols
    cols = list(columns)
    if not cols:
        raise DatasetError("empty column list")
    for c in cols:
        if c not in after:
            raise DatasetError(f"unknown column: {c!r}")
    return cols


def task_roles(handle: DatasetHandle, needed_final, program=None, text_override=()):
    """Roles for the draw: parse only the file columns the task touches."""
    needed = set(needed_final)
    if program:
        for step in program.steps:
            needed.add(step.column)
        # dummy columns are produced, not parsed
        from .transform import AdyStep

        produced = set()
        for step in program.steps:
            if isinstance(step, AdyStep):
                produced.update(step.dummy_names())
        needed -= produced
    needed &= set((*handle.header, INTERCEPT))
    return resolve_roles(handle, needed=needed, text_override=text_override)


def run_stats(handle: DatasetHandle, plan: SamplingPlan, columns=None,
              program: TransformProgram | None = None):
    """Serial stats task: yields (k, StatsAggregate) after each replicate.

    The yielded aggregate is live (the same object, updated in place);
    snapshot via .table()/.to_json() while iterating. Stops early when
    plan.se_target is set and every requested column's display SE falls
    below it.
    """
    cols = resolve_stat_columns(handle, columns, program)
    roles = task_roles(handle, cols, program)
    agg = StatsAggregate(cols, plan.n)
    for k in range(1, plan.k_max + 1):
        frame = apply_program(draw(handle, plan, k, roles), program)
        agg.add_replicate(k, replicate_stat_moments(frame, cols))
        yield k, agg
        if plan.se_target is not None and se_stop_satisfied(agg, plan.se_target):
            return


def se_stop_satisfied(agg: StatsAggregate, target: float) -> bool:
    rows = agg.table()
    return all(rows[c].se == rows[c].se and rows[c].se < target for c in agg.columns)


# ---------------------------------------------------------------- frequency tables

class FreqAggregate:
    """Pooled level counts for one variable over replicates."""

    def __init__(self, variable: str, table_view: bool = False, display_cap: int = 100):
        self.variable = variable
        self.table_view = table_view
        self.display_cap = display_cap
        self.counts: Counter = Counter()
        self.total = 0
        self._ks: set = set()

    @property
    def k_completed(self) -> int:
        return len(self._ks)

    def add_replicate(self, k: int, counts: Counter, n_rows: int) -> None:
        if k in self._ks:
            raise ValueError(f"replicate {k} already merged")
        self._ks.add(k)
        self.counts.update(counts)
        self.total += n_rows

    @property
    def levels_discovered(self) -> int:
        return len(self.counts)

    def rows(self):
        """(level, count, pct) sorted by count desc then level; capped in table view."""
        ordered = sorted(self.counts.items(), key=lambda kv: (-kv[1], kv[0]))
        if self.table_view and len(ordered) > self.display_cap:
            ordered = ordered[: self.display_cap]
        return [(lvl, c, 100.0 * c / self.total) for lvl, c in ordered]

    @property
    def capped(self) -> bool:
        return self.table_view and self.levels_discovered > self.display_cap

    def to_json(self, elapsed_s=None) -> dict:
        out = {
            "variable": self.variable,
            "levels_discovered": self.levels_discovered,
            "total": self.total,
            "capped": self.capped,
            "levels": [{"level": l, "count": c, "pct": p} for l, c, p in self.rows()],
            "k": self.k_completed,
        }
        if elapsed_s is not None:
            out["elapsed_s"] = elapsed_s
        return out


def replicate_level_counts(frame: Frame, variable: str) -> Counter:
    cells = frame.text(variable)
    return Counter("nan" if c is None else c for c in cells)


def run_table(handle: DatasetHandle, plan: SamplingPlan, variable: str,
              table_view: bool = False):
    """Serial frequency-table task; yields (k, FreqAggregate) per replicate."""
    if variable != INTERCEPT:
        handle.column_index(variable)  # existence check
    roles = task_roles(handle, [variable], text_override={variable})
    agg = FreqAggregate(variable, table_view=table_view)
    for k in range(1, plan.k_max + 1):
        frame = draw(handle, plan, k, roles)
        agg.add_replicate(k, replicate_level_counts(frame, variable), frame.n_rows)
        yield k, agg


# ---------------------------------------------------------------- correlation

class CorrAggregate:
    """Entrywise-averaged Pearson correlation matrices."""

    def __init__(self, columns):
        self.columns = list(columns)
        self._reps: dict = {}

    @property
    def k_completed(self) -> int:
        return len(self._reps)

    def add_replicate(self, k: int, matrix: np.ndarray) -> None:
        if k in self._reps:
            raise ValueError(f"replicate {k} already merged")
        self._reps[k] = matrix

    def matrix(self) -> np.ndarray:
        stack = np.stack([self._reps[i] for i in sorted(self._reps)])
        with np.errstate(invalid="ignore"):
            out = np.nanmean(stack, axis=0)
        np.fill_diagonal(out, 1.0)
        return out

    def to_json(self, elapsed_s=None) -> dict:
        m = self.matrix()
        out = {
            "columns": self.columns,
            "matrix": [[_json_num(v) for v in row] for row in m.tolist()],
            "k": self.k_completed,
        }
        if elapsed_s is not None:
            out["elapsed_s"] = elapsed_s
        return out


def replicate_correlation(frame: Frame, columns) -> np.ndarray:
    """Pairwise-complete Pearson correlations for one frame."""
    p = len(columns)
    data = [np.asarray(frame.numeric(c), dtype=np.float64) for c in columns]
    finite = [np.isfinite(v) for v in data]
    out = np.full((p, p), NAN)
    np.fill_diagonal(out, 1.0)
    for i in range(p):
        for j in range(i + 1, p):
            both = finite[i] & finite[j]
            cnt = int(both.sum())
            if cnt < 2:
                continue
            xi = data[i][both]
            xj = data[j][both]
            dx = xi - xi.mean()
            dy = xj - xj.mean()
            sx = float(dx @ dx)
            sy = float(dy @ dy)
            if sx <= 0 or sy <= 0:
                continue
            out[i, j] = out[j, i] = float(dx @ dy) / math.sqrt(sx * sy)
    return out


def correlation_matrix(handle: DatasetHandle, plan: SamplingPlan, columns=None,
                       program: TransformProgram | None = None):
    """Serial correlation task; yields (k, CorrAggregate) per replicate."""
    cols = resolve_stat_columns(handle, columns, program)
    if len(cols) < 2:
        raise DatasetError("correlation needs at least 2 quantitative columns")
    roles = task_roles(handle, cols, program)
    agg = CorrAggregate(cols)
    for k in range(1, plan.k_max + 1):
        frame = apply_program(draw(handle, plan, k, roles), program)
        agg.add_replicate(k, replicate_correlation(frame, cols))
        yield k, agg


# ---------------------------------------------------------------- variance forecast

def expr_derivative(g, mu: float, order: int = 1) -> float:
    """Finite-difference derivative of a transform expression at mu."""
    if isinstance(g, str):
        g = parse_expr(g)
    ce = compile_expr(g)
    h = max(1e-6, 1e-6 * abs(mu))
    if order == 1:
        lo, hi = ce.run(np.array([mu - h, mu + h]))
        return (hi - lo) / (2.0 * h)
    if order == 2:
        lo, mid, hi = ce.run(np.array([mu - h, mu, mu + h]))
        return (hi - 2.0 * mid + lo) / (h * h)
    raise ValueError("order must be 1 or 2")


def variance_forecast(g, mu: float, sigma2: float, N: float, n: int, K: int) -> float:
    """Predicted var of the K-replicate averaged estimator of g(mean).

    g'(mu)^2 * sigma^2 * (1/N + 1/(nK)); N may be math.inf to drop the
    finite-population term.
    """
    gdot = expr_derivative(g, mu, order=1)
    if not math.isfinite(gdot):
        raise ValueError(f"derivative of g at {mu} is not finite")
    return gdot * gdot * sigma2 * (1.0 / N + 1.0 / (n * K))
