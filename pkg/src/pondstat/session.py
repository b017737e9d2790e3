"""Task orchestration: replicate scheduling across worker threads,
ordered merging, SE-threshold stopping, cancellation and per-replicate
emission streams.

Workers may finish out of order; the merger releases replicate k only
once 1..k are all merged, so the emission stream is a pure function of
(dataset bytes, task spec, master seed) regardless of worker count.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field, replace

from . import model as model_mod
from . import plotdata
from . import stats as stats_mod
from .pump import SamplingPlan, draw, draw_random_access, draw_sequential, replicate_seed
from .source import (INTERCEPT, QUALITATIVE, QUANTITATIVE, DatasetError,
                     DatasetHandle, update_schema)
from .transform import AdyStep, TransformProgram, apply_program, simulate_roles

RUNNING = "running"
STOPPED_BY_SE = "stopped_by_se"
STOPPED_BY_K = "stopped_by_k"
CANCELLED = "cancelled"
FAILED = "failed"

TASK_KINDS = ("stats", "table", "corr", "ols", "logit", "plot")


@dataclass(frozen=True)
class TaskSpec:
    """Everything needed to reproduce a task's emission stream."""

    kind: str
    plan: SamplingPlan
    program: TransformProgram = TransformProgram()
    columns: tuple | None = None          # stats / corr
    variable: str | None = None           # table
    table_view: bool = False
    y: str | None = None                  # models
    xs: tuple = ()
    plot: dict = field(default_factory=dict)  # plot kind & args

    def __post_init__(self):
        if self.kind not in TASK_KINDS:
            raise DatasetError(f"unknown task kind: {self.kind!r}")


class _Discard:
    def __init__(self, reason: str):
        self.reason = reason


class Task:
    """A running (or finished) subsampling task with an emission log."""

    def __init__(self, task_id: str, spec: TaskSpec, handle: DatasetHandle, workers: int = 1):
        self.id = task_id
        self.spec = spec
        self.handle = handle
        self.state = RUNNING
        self.error: str | None = None
        self.emissions: list = []
        self.latest_plot = None
        self._cond = threading.Condition()
        self._results: dict = {}
        self._frontier = 0
        self._next_k = 1
        self._halt = False
        self._discarded = 0
        self._fits: dict = {}
        self._t0 = time.monotonic()
        self._replicate, self._aggregate, self._emit_k = _build_runner(spec, handle)
        self._threads = [threading.Thread(target=self._worker, daemon=True)
                         for _ in range(max(1, min(workers, spec.plan.k_max)))]
        for t in self._threads:
            t.start()

    # ---------------------------------------------------------- workers

    def _worker(self):
        while True:
            with self._cond:
                if self._halt or self._next_k > self.spec.plan.k_max:
                    return
                k = self._next_k
                self._next_k += 1
            try:
                payload = self._replicate(k)
            except Exception as exc:  # replicate hard failure ends the task
                with self._cond:
                    if self.state == RUNNING:
                        self._finish(FAILED, error=f"replicate {k}: {exc}")
                return
            with self._cond:
                if self._halt:
                    return
                self._results[k] = payload
                self._advance()

    def _advance(self):
        """Merge contiguous replicates and emit; caller holds the lock."""
        while self._frontier + 1 in self._results and self.state == RUNNING:
            k = self._frontier + 1
            payload = self._results.pop(k)
            self._frontier = k
            if isinstance(payload, _Discard):
                self._discarded += 1
            emission = self._emit_k(self, k, payload)
            if emission is not None:
                emission["task_id"] = self.id
                emission["state"] = RUNNING
                emission.setdefault("k", k)
                emission["elapsed_s"] = round(time.monotonic() - self._t0, 3)
                self.emissions.append(emission)
                self._cond.notify_all()
                if self._se_stop_now(emission):
                    self._finish(STOPPED_BY_SE)
                    return
            if k == self.spec.plan.k_max:
                if self.spec.kind in ("ols", "logit") and \
                        self._discarded * 2 > self.spec.plan.k_max:
                    self._finish(FAILED, error=f"{self._discarded} of "
                                               f"{self.spec.plan.k_max} replicates discarded")
                else:
                    self._finish(STOPPED_BY_K)
                return

    def _se_stop_now(self, emission) -> bool:
        target = self.spec.plan.se_target
        if target is None:
            return False
        if self.spec.kind == "stats":
            return stats_mod.se_stop_satisfied(self._aggregate, target)
        if self.spec.kind in ("ols", "logit"):
            rows = emission.get("coefficients", {})
            ses = [r.get("standerr") for r in rows.values()]
            return bool(ses) and all(s is not None and s < target for s in ses)
        return False

    def _finish(self, state: str, error: str | None = None):
        self.state = state
        self.error = error
        self._halt = True
        terminal = {"task_id": self.id, "k": self._frontier, "state": state,
                    "elapsed_s": round(time.monotonic() - self._t0, 3), "terminal": True}
        if error:
            terminal["error"] = error
        self.emissions.append(terminal)
        self._cond.notify_all()

    # ---------------------------------------------------------- consumers

    def cancel(self) -> str:
        """Stop producing emissions; a finished task is left untouched."""
        with self._cond:
            if self.state == RUNNING:
                self._finish(CANCELLED)
            return self.state

    def wait(self, timeout: float | None = None) -> str:
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cond:
            while self.state == RUNNING:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    break
                self._cond.wait(0.05 if remaining is None else min(0.05, remaining))
        for t in self._threads:
            t.join(timeout=0.0)
        return self.state

    def stream(self, from_index: int = 0):
        """Yield emissions in order; ends after the terminal event."""
        i = from_index
        while True:
            with self._cond:
                while len(self.emissions) <= i and self.state == RUNNING:
                    self._cond.wait(0.05)
                if len(self.emissions) <= i:
                    return
                emission = self.emissions[i]
            i += 1
            yield emission
            if emission.get("terminal"):
                return

    def snapshot(self) -> dict:
        with self._cond:
            return {"task_id": self.id, "kind": self.spec.kind, "state": self.state,
                    "k": self._frontier, "emissions": len(self.emissions),
                    "error": self.error}


def _holdout_frame(handle, plan, k, roles):
    seed = replicate_seed(plan.master_seed, k, salt="holdout")
    if plan.sequential:
        return draw_sequential(handle, plan.n, seed, roles, k=k)
    return draw_random_access(handle, plan.n, seed, roles, k=k)


def _build_runner(spec: TaskSpec, handle: DatasetHandle):
    """(replicate_fn, aggregate, emit_fn) for a task kind; validates eagerly."""
    plan = spec.plan
    program = spec.program

    if spec.kind == "stats":
        cols = stats_mod.resolve_stat_columns(handle, spec.columns, program)
        roles = stats_mod.task_roles(handle, cols, program)
        agg = stats_mod.StatsAggregate(cols, plan.n)

        def run(k):
            frame = apply_program(draw(handle, plan, k, roles), program)
            return stats_mod.replicate_stat_moments(frame, cols)

        def emit(task, k, payload):
            agg.add_replicate(k, payload)
            return agg.to_json(elapsed_s=0.0)

        return run, agg, emit

    if spec.kind == "table":
        variable = spec.variable
        if variable is None:
            raise DatasetError("table task needs a variable")
        if variable != INTERCEPT:
            handle.column_index(variable)
        roles = stats_mod.task_roles(handle, [variable], text_override={variable})
        agg = stats_mod.FreqAggregate(variable, table_view=spec.table_view)

        def run(k):
            frame = draw(handle, plan, k, roles)
            return stats_mod.replicate_level_counts(frame, variable), frame.n_rows

        def emit(task, k, payload):
            counts, n_rows = payload
            agg.add_replicate(k, counts, n_rows)
            return agg.to_json(elapsed_s=0.0)

        return run, agg, emit

    if spec.kind == "corr":
        cols = stats_mod.resolve_stat_columns(handle, spec.columns, program)
        if len(cols) < 2:
            raise DatasetError("correlation needs at least 2 columns")
        roles = stats_mod.task_roles(handle, cols, program)
        agg = stats_mod.CorrAggregate(cols)

        def run(k):
            frame = apply_program(draw(handle, plan, k, roles), program)
            return stats_mod.replicate_correlation(frame, cols)

        def emit(task, k, payload):
            agg.add_replicate(k, payload)
            return agg.to_json(elapsed_s=0.0)

        return run, agg, emit

    if spec.kind in ("ols", "logit"):
        program, xs = _model_program(spec, handle)
        if plan.k_max < 2:
            raise DatasetError("model tasks need k_max >= 2 for standard errors")
        needed = [spec.y, *xs, INTERCEPT]
        roles = stats_mod.task_roles(handle, needed, program)
        fits: dict = {}

        def run(k):
            frame = apply_program(draw(handle, plan, k, roles), program)
            try:
                if spec.kind == "ols":
                    return model_mod.fit_ols_replicate(frame, spec.y, xs)
                holdout = apply_program(_holdout_frame(handle, plan, k, roles), program)
                return model_mod.fit_logit_replicate(frame, spec.y, xs, holdout)
            except model_mod.FitError as exc:
                return _Discard(str(exc))

        def emit(task, k, payload):
            if not isinstance(payload, _Discard):
                fits[k] = payload
            valid = [fits[i] for i in sorted(fits)]
            if len(valid) < 2:
                return None
            table = model_mod.aggregate_fits(valid)
            table = replace(table, discarded=task._discarded)
            task.latest_plot = plotdata.build_tstat_bars(table, k=k)
            out = table.to_json(elapsed_s=0.0)
            out["replicates"] = [
                {"k": i, "metric": model_mod._num(fits[i].metric),
                 "rows_used": fits[i].rows_used}
                for i in sorted(fits)
            ]
            return out

        return run, None, emit

    # plot task
    args = dict(spec.plot)
    plot_kind = args.pop("kind", None)
    if plot_kind not in ("hist", "mu", "std", "size", "box", "gbox", "corr"):
        raise DatasetError(f"unknown plot kind: {plot_kind!r}")
    needed = [v for key in ("column", "y", "x", "g") for v in [args.get(key)] if v]
    if plot_kind == "corr":
        cols = stats_mod.resolve_stat_columns(handle, args.get("columns"), program)
        roles = stats_mod.task_roles(handle, cols, program)
        agg = stats_mod.CorrAggregate(cols)
    else:
        after = simulate_roles(program, {c: handle.schema.role(c)
                                         for c in (*handle.header, INTERCEPT)
                                         if handle.schema.role(c) != "dropped"})
        for v in needed:
            if v not in after:
                raise DatasetError(f"unknown column: {v!r}")
        roles = stats_mod.task_roles(handle, needed, program)
        agg = None

    def run(k):
        frame = apply_program(draw(handle, plan, k, roles), program)
        if plot_kind == "hist":
            return plotdata.build_hist(frame, args["column"], args.get("bins"))
        if plot_kind in ("mu", "std", "size"):
            return plotdata.build_group_bar(frame, args.get("y"), args["g"], plot_kind)
        if plot_kind == "box":
            return plotdata.build_box(frame, args["y"], args.get("x"))
        if plot_kind == "gbox":
            return plotdata.build_gbox(frame, args["y"], args["x"], args.get("groups", 10))
        # corr: workers return the replicate matrix; averaging happens in
        # the ordered merge so concurrency cannot reorder it
        return stats_mod.replicate_correlation(frame, agg.columns)

    def emit(task, k, payload):
        if plot_kind == "corr":
            agg.add_replicate(k, payload)
            payload = plotdata.build_corr_heatmap(agg.columns, agg.matrix(), k=k)
        task.latest_plot = payload
        return {"plot": payload.to_json(), "k": k}

    return run, agg, emit


def _model_program(spec: TaskSpec, handle: DatasetHandle):
    """Auto-expand qualitative predictors with declared scale levels."""
    program = spec.program
    xs = [c for c in spec.xs if c != INTERCEPT]
    if spec.y is None or not xs:
        raise DatasetError("model tasks need y and at least one x column")
    base_roles = {c: handle.schema.role(c) for c in (*handle.header, INTERCEPT)
                  if handle.schema.role(c) != "dropped"}
    roles_after = simulate_roles(program, base_roles)
    out_xs = []
    for c in xs:
        if c not in roles_after:
            raise DatasetError(f"unknown column: {c!r}")
        if roles_after[c] == QUALITATIVE:
            levels = handle.schema.levels.get(c)
            if not levels:
                raise DatasetError(f"qualitative predictor {c!r} needs ady or scale_level")
            step = AdyStep(c, tuple(levels))
            program = program.extended(step)
            roles_after = simulate_roles(TransformProgram((step,)), roles_after)
            out_xs.extend(step.dummy_names())
        else:
            out_xs.append(c)
    if spec.y not in roles_after:
        raise DatasetError(f"unknown column: {spec.y!r}")
    return program, out_xs


class Session:
    """One dataset, one evolving transform program, many tasks."""

    _counter = 0

    def __init__(self, handle: DatasetHandle, workers: int = 1,
                 n: int = 10**5, k_max: int = 5, sequential: bool = True,
                 master_seed: int = 0, se_target: float | None = None):
        Session._counter += 1
        self.id = f"s{Session._counter}"
        self.handle = handle
        self.workers = workers
        self.program = TransformProgram()
        self.defaults = {"n": n, "k_max": k_max, "sequential": sequential,
                         "master_seed": master_seed, "se_target": se_target}
        self.tasks: dict = {}
        self._task_seq = 0
        self._lock = threading.Lock()

    def plan(self, **overrides) -> SamplingPlan:
        merged = {**self.defaults, **{k: v for k, v in overrides.items() if v is not None}}
        return SamplingPlan(**merged)

    def set_default(self, name: str, value) -> None:
        if name not in self.defaults:
            raise DatasetError(f"unknown parameter: {name!r}")
        self.defaults[name] = value
        self.plan()  # validate eagerly

    def add_step(self, step) -> None:
        roles = {c: self.handle.schema.role(c)
                 for c in (*self.handle.header, INTERCEPT)
                 if self.handle.schema.role(c) != "dropped"}
        simulate_roles(self.program.extended(step), roles)  # validate
        self.program = self.program.extended(step)

    def set_qlist(self, names) -> None:
        self.handle = update_schema(self.handle, qlist=list(names))

    def set_drop(self, names) -> None:
        self.handle = update_schema(self.handle, drop=list(names))

    def start(self, spec: TaskSpec, workers: int | None = None) -> Task:
        with self._lock:
            self._task_seq += 1
            task_id = f"t{self._task_seq}"
            task = Task(task_id, spec, self.handle,
                        workers=self.workers if workers is None else workers)
            self.tasks[task_id] = task
            return task

    def cancel(self, task_id: str) -> str:
        task = self.get_task(task_id)
        return task.cancel()

    def get_task(self, task_id: str) -> Task:
        try:
            return self.tasks[task_id]
        except KeyError:
            raise DatasetError(f"unknown task: {task_id!r}") from None

    def latest_task(self) -> Task | None:
        if not self._task_seq:
            return None
        return self.tasks.get(f"t{self._task_seq}")

    def schema_json(self) -> dict:
        h = self.handle
        return {"path": h.path, "header": list(h.header), "n_estimate": h.n_estimate,
                "shuffled": h.shuffled,
                "roles": {c: h.schema.role(c) for c in (*h.header, INTERCEPT)},
                "levels": {c: list(v) for c, v in h.schema.levels.items()},
                "program": self.program.lines(),
                "defaults": dict(self.defaults)}
