"""The REPL command grammar, shared verbatim by the interactive CLI and
the HTTP service (one parser, one documented surface).

Commands either mutate the session (qlist/drop/app/bin/ady/set) or start
a task (stats/table/corr/ols/logit/plot) and return it.
"""

from __future__ import annotations

from dataclasses import dataclass

from .session import Session, TaskSpec
from .source import INTERCEPT, DatasetError
from .transform import AdyStep, AppStep, BinStep, ExprError

USAGE = """commands:
  stats [col,..]            descriptive statistics (default: every column)
  table <col> [tv]          frequency table; tv shows top levels
  corr <col,col,..>         averaged correlation matrix
  app <col> <expr>          transform a column, e.g. app ArrDelay sign(x)*log1p(abs(x))
  bin <col> <t1,..> <n0,..> threshold a column into named levels
  ady <col> <l1,..>         dummy-expand a column (first level list order kept)
  qlist [col,..]            declare quantitative columns (empty resets)
  drop [col,..]             exclude columns from analysis (empty resets)
  ols <y> ~ <x,..>          linear model task
  logit <y> ~ <x,..>        logistic model task (y must be 0/1 after transforms)
  plot <kind> <args>        hist <col> [bins] | box <y> [x] | gbox <y> <x> [groups]
                            | mu|std|size <y> <g> | corr <col,..>
  set <param> <value>       subsize | niter | seq | seed | se_target
  schema                    show columns, roles and the active program
  stop [task]               cancel the latest (or named) task
  quit                      leave the session
"""


class CommandError(Exception):
    """Bad command; the message echoes usage without killing the session."""


@dataclass
class CommandResult:
    kind: str                 # "task" | "ok" | "info" | "quit"
    task: object = None
    message: str = ""
    payload: dict | None = None


def _split_names(text: str) -> list:
    names = [p for chunk in text.split(",") for p in chunk.split()]
    return [n for n in names if n]


def _columns_arg(rest: str):
    return _split_names(rest) or None


def _formula(rest: str):
    if "~" not in rest:
        raise CommandError("usage: ols|logit <y> ~ <x1,x2,...>")
    left, right = rest.split("~", 1)
    y = left.strip()
    xs = _split_names(right)
    if not y or not xs:
        raise CommandError("usage: ols|logit <y> ~ <x1,x2,...>")
    return y, xs


_PARAMS = {"subsize": ("n", int), "niter": ("k_max", int), "seed": ("master_seed", int),
           "se_target": ("se_target", float),
           "seq": ("sequential", lambda v: v.lower() in ("1", "true", "yes", "on"))}


def run_command(session: Session, text: str, workers: int | None = None) -> CommandResult:
    """Parse and execute one command line against a session."""
    text = text.strip()
    if not text or text.startswith("#"):
        return CommandResult("ok")
    verb, _, rest = text.partition(" ")
    rest = rest.strip()
    try:
        return _dispatch(session, verb, rest, workers)
    except (DatasetError, ExprError, ValueError) as exc:
        raise CommandError(str(exc)) from exc


def _dispatch(session: Session, verb: str, rest: str, workers) -> CommandResult:
    if verb in ("quit", "exit"):
        return CommandResult("quit")
    if verb == "help":
        return CommandResult("info", message=USAGE)
    if verb == "schema":
        return CommandResult("info", payload=session.schema_json())

    if verb == "set":
        name, _, value = rest.partition(" ")
        if name not in _PARAMS or not value.strip():
            raise CommandError("usage: set subsize|niter|seq|seed|se_target <value>")
        field, conv = _PARAMS[name]
        session.set_default(field, conv(value.strip()))
        return CommandResult("ok", message=f"{name} = {session.defaults[field]}")

    if verb == "qlist":
        session.set_qlist(_split_names(rest))
        return CommandResult("ok", message=f"quantitative: {_split_names(rest) or '[]'}")
    if verb == "drop":
        session.set_drop(_split_names(rest))
        return CommandResult("ok", message=f"dropped: {_split_names(rest) or '[]'}")

    if verb == "app":
        col, _, expr = rest.partition(" ")
        if not col or not expr.strip():
            raise CommandError("usage: app <column> <expression>")
        session.add_step(AppStep(col, expr.strip()))
        return CommandResult("ok", message=f"app {col}")
    if verb == "bin":
        parts = rest.split()
        if len(parts) != 3:
            raise CommandError("usage: bin <column> <t1,..,tm> <name0,..,namem>")
        col, ts, names = parts
        try:
            thresholds = tuple(float(t) for t in ts.split(","))
        except ValueError:
            raise CommandError(f"bad thresholds: {ts!r}") from None
        session.add_step(BinStep(col, thresholds, tuple(names.split(","))))
        return CommandResult("ok", message=f"bin {col}")
    if verb == "ady":
        parts = rest.split()
        if len(parts) != 2:
            raise CommandError("usage: ady <column> <level1,..,levelk>")
        session.add_step(AdyStep(parts[0], tuple(parts[1].split(","))))
        return CommandResult("ok", message=f"ady {parts[0]}")

    if verb == "stop":
        task = session.get_task(rest) if rest else session.latest_task()
        if task is None:
            raise CommandError("no task to stop")
        state = task.cancel()
        return CommandResult("ok", message=f"{task.id}: {state}")

    if verb in ("stats", "table", "corr", "ols", "logit", "plot"):
        spec = _task_spec(session, verb, rest)
        task = session.start(spec, workers=workers)
        return CommandResult("task", task=task)

    raise CommandError(f"unknown command {verb!r} (try 'help')")


def _task_spec(session: Session, verb: str, rest: str) -> TaskSpec:
    plan = session.plan()
    program = session.program
    if verb == "stats":
        cols = _columns_arg(rest)
        if cols is None:
            # analyst default: triage every non-dropped column (text columns
            # surface as mp=100 rows), mirroring the schema-discovery flow
            cols = [c for c in (*session.handle.header, INTERCEPT)
                    if session.handle.schema.role(c) != "dropped"]
        return TaskSpec("stats", plan, program, columns=tuple(cols))
    if verb == "table":
        parts = rest.split()
        if not parts:
            raise CommandError("usage: table <column> [tv]")
        tv = len(parts) > 1 and parts[1].lower() in ("tv", "true", "1")
        return TaskSpec("table", plan, program, variable=parts[0], table_view=tv)
    if verb == "corr":
        cols = _columns_arg(rest)
        if cols is not None and len(cols) < 2:
            raise CommandError("corr needs at least two columns")
        return TaskSpec("corr", plan, program,
                        columns=None if cols is None else tuple(cols))
    if verb in ("ols", "logit"):
        y, xs = _formula(rest)
        return TaskSpec(verb, plan, program, y=y, xs=tuple(xs))

    # plot
    parts = rest.split()
    if not parts:
        raise CommandError("usage: plot <hist|box|gbox|mu|std|size|corr> ...")
    kind, *args = parts
    if kind == "hist":
        if not args:
            raise CommandError("usage: plot hist <column> [bins]")
        plot = {"kind": "hist", "column": args[0]}
        if len(args) > 1:
            plot["bins"] = int(args[1])
    elif kind == "box":
        if not args:
            raise CommandError("usage: plot box <y> [x]")
        plot = {"kind": "box", "y": args[0]}
        if len(args) > 1:
            plot["x"] = args[1]
    elif kind == "gbox":
        if len(args) < 2:
            raise CommandError("usage: plot gbox <y> <x> [groups]")
        plot = {"kind": "gbox", "y": args[0], "x": args[1]}
        if len(args) > 2:
            plot["groups"] = int(args[2])
    elif kind in ("mu", "std", "size"):
        if kind == "size" and len(args) == 1:
            plot = {"kind": "size", "g": args[0]}
        elif len(args) < 2:
            raise CommandError(f"usage: plot {kind} <y> <g>")
        else:
            plot = {"kind": kind, "y": args[0], "g": args[1]}
    elif kind == "corr":
        cols = _columns_arg(" ".join(args))
        plot = {"kind": "corr", "columns": None if cols is None else tuple(cols)}
    else:
        raise CommandError(f"unknown plot kind {kind!r}")
    return TaskSpec("plot", plan, program, plot=plot)
