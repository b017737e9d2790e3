"""Command-line front door: one-shot subcommands, an interactive REPL,
and the `serve` entry for the HTTP session service.

Exit codes: 0 success, 1 usage error, 2 data error. Progress and timing
go to stderr; stdout carries only the final table / JSON / file path, so
seeded runs are byte-reproducible.
"""

from __future__ import annotations

import argparse
import os
import sys
import threading
import time

from .commands import USAGE, CommandError, run_command
from .pump import DrawError
from .session import Session, TaskSpec
from .shuffle import ShuffleError, shuffle_file
from .source import Codebook, DatasetError, count_rows_exact, open_dataset
from .tables import canonical_json, render_emission
from .transform import ExprError, parse_program_line
from . import plotdata

_DATA_ERRORS = (DatasetError, DrawError, ShuffleError, CommandError, ExprError,
                OSError, ValueError)


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    if not hasattr(args, "func"):
        parser.print_help(sys.stderr)
        return 1
    try:
        return args.func(args)
    except _DATA_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pondstat",
                                     description="Subsampling statistics for massive CSVs")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("shuffle", help="uniformly shuffle a file's data rows")
    p.add_argument("input")
    p.add_argument("output")
    p.add_argument("--mem", type=int, default=1 << 28, help="memory budget in bytes")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_shuffle)

    p = sub.add_parser("size", help="estimate the data row count")
    p.add_argument("data")
    p.add_argument("--probes", type=int, default=1000)
    p.add_argument("--exact", action="store_true", help="full pass instead of probing")
    p.set_defaults(func=_cmd_size)

    for name, helptext in (("stats", "descriptive statistics"),
                           ("table", "frequency table"),
                           ("corr", "averaged correlation matrix"),
                           ("ols", "linear model"),
                           ("logit", "logistic model"),
                           ("hist", "histogram SVG"),
                           ("box", "boxplot SVG"),
                           ("gbox", "grouped boxplot SVG"),
                           ("bar", "group bar chart SVG")):
        p = sub.add_parser(name, help=helptext)
        _add_task_args(p, name)
        p.set_defaults(func=_cmd_task, task=name)

    p = sub.add_parser("repl", help="interactive session")
    _add_sampling_args(p)
    p.add_argument("data")
    p.add_argument("--codebook")
    p.set_defaults(func=_cmd_repl)

    p = sub.add_parser("serve", help="run the HTTP session service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=_cmd_serve)
    return parser


def _add_sampling_args(p):
    p.add_argument("--subsize", type=int, default=10**5, help="subsample size n")
    p.add_argument("--niter", type=int, default=5, help="replicate budget K")
    seq = p.add_mutually_exclusive_group()
    seq.add_argument("--seq", dest="seq", action="store_true", default=True,
                     help="sequential draws from a shuffled file (default)")
    seq.add_argument("--no-seq", dest="seq", action="store_false",
                     help="random byte-seek draws")
    p.add_argument("--seed", type=int, default=None, help="master seed (echoed; default time-derived)")
    p.add_argument("--se-target", type=float, default=None,
                   help="stop when every tracked SE (x100) falls below this")
    p.add_argument("--workers", type=int, default=1, help="concurrent replicate workers")


def _add_task_args(p, name: str):
    p.add_argument("data")
    p.add_argument("--codebook", help="codebook JSON path")
    _add_sampling_args(p)
    p.add_argument("--app", action="append", default=[], metavar="'COL EXPR'")
    p.add_argument("--bin", action="append", default=[], metavar="'COL T1,..  N0,..'")
    p.add_argument("--ady", action="append", default=[], metavar="'COL L1,..'")
    p.add_argument("--program", help="transform program file (one step per line)")
    p.add_argument("--json", action="store_true", help="machine-readable final output")
    p.add_argument("--live", action="store_true", help="reprint the table on every emission (stderr)")
    p.add_argument("--glossary", action="store_true", help="append the column glossary")
    if name in ("stats", "corr", "table", "hist"):
        p.add_argument("--col", help="column (or comma list) to analyze")
    if name == "table":
        p.add_argument("--tv", action="store_true", help="show per-level percentages")
    if name in ("ols", "logit"):
        p.add_argument("--y", required=True)
        p.add_argument("--x", required=True, help="comma list of predictors")
        p.add_argument("--plot", action="store_true", help="also write the tStat bar SVG")
    if name in ("box", "gbox", "bar"):
        p.add_argument("--y")
        p.add_argument("--x")
    if name == "bar":
        p.add_argument("--stat", choices=("mu", "std", "size"), default="mu")
        p.add_argument("--g", help="grouping column")
    if name == "gbox":
        p.add_argument("--groups", type=int, default=10)
    if name == "hist":
        p.add_argument("--bins", type=int, default=None)
    p.add_argument("--out", default=os.environ.get("PONDSTAT_OUT", "."),
                   help="output directory for SVG files")


def _cmd_shuffle(args) -> int:
    report = shuffle_file(args.input, args.output, memory_budget=args.mem, seed=args.seed)
    print(f"rows: {report.output_rows}")
    print(f"buckets: {report.buckets}")
    print(f"peak buffer bytes: {report.bytes_peak_memory}")
    return 0


def _cmd_size(args) -> int:
    handle = open_dataset(args.data, probes=args.probes)
    print(count_rows_exact(handle) if args.exact else handle.n_estimate)
    return 0


def _open_session(args) -> Session:
    codebook = Codebook.from_file(args.codebook) if getattr(args, "codebook", None) else None
    handle = open_dataset(args.data, "with_codebook" if codebook else "no_codebook",
                          codebook)
    seed = args.seed if args.seed is not None else time.time_ns() % (2**31)
    print(f"seed = {seed}", file=sys.stderr)
    session = Session(handle, workers=args.workers, n=args.subsize, k_max=args.niter,
                      sequential=args.seq, master_seed=seed, se_target=args.se_target)
    for line in _program_lines(args):
        session.add_step(parse_program_line(line))
    return session


def _program_lines(args):
    lines = []
    if getattr(args, "program", None):
        with open(args.program, "r", encoding="utf-8") as f:
            lines += [l for l in f.read().splitlines() if l.strip() and not l.startswith("#")]
    lines += [f"app {v}" for v in getattr(args, "app", [])]
    lines += [f"bin {v}" for v in getattr(args, "bin", [])]
    lines += [f"ady {v}" for v in getattr(args, "ady", [])]
    return lines


def _columns(args):
    col = getattr(args, "col", None)
    if not col:
        return None
    return tuple(c for chunk in col.split(",") for c in chunk.split() if c)


def _progress(kind: str, emission: dict, live: bool):
    if emission.get("terminal"):
        line = f"[{emission['state']}] k={emission['k']} elapsed={emission['elapsed_s']}s"
        if emission.get("error"):
            line += f" error: {emission['error']}"
        print(line, file=sys.stderr)
        return
    if live:
        print(render_emission(kind, emission), file=sys.stderr)
        print(file=sys.stderr)
    else:
        print(f"k={emission.get('k')} elapsed={emission.get('elapsed_s')}s", file=sys.stderr)


def _run_task(session: Session, spec: TaskSpec, args) -> dict | None:
    task = session.start(spec)
    final = None
    for emission in task.stream():
        _progress(spec.kind, emission, args.live)
        if not emission.get("terminal"):
            final = emission
    if task.state == "failed":
        print(f"error: {task.error}", file=sys.stderr)
        return None
    return final


def _strip_envelope(emission: dict) -> dict:
    return {k: v for k, v in emission.items()
            if k not in ("task_id", "state", "elapsed_s", "terminal")}


def _cmd_task(args) -> int:
    session = _open_session(args)
    name = args.task
    plan = session.plan()

    if name in ("stats", "corr", "table", "ols", "logit"):
        if name == "stats":
            cols = _columns(args)
            if cols is None:
                cols = tuple(c for c in (*session.handle.header, "_INTERCEPT_")
                             if session.handle.schema.role(c) != "dropped")
            spec = TaskSpec("stats", plan, session.program, columns=cols)
        elif name == "corr":
            spec = TaskSpec("corr", plan, session.program, columns=_columns(args))
        elif name == "table":
            cols = _columns(args)
            if not cols or len(cols) != 1:
                raise CommandError("table needs exactly one --col")
            spec = TaskSpec("table", plan, session.program, variable=cols[0],
                            table_view=args.tv)
        else:
            xs = tuple(x for x in args.x.split(",") if x)
            if not args.codebook:
                # no codebook means the all-qualitative default schema;
                # naming file columns in --y/--x declares them numeric
                # (transform-produced columns are already quantitative)
                header = set(session.handle.header)
                session.set_qlist([c for c in (args.y, *xs) if c in header])
            spec = TaskSpec(name, plan, session.program, y=args.y, xs=xs)
        final = _run_task(session, spec, args)
        if final is None:
            return 2
        if args.json:
            print(canonical_json(_strip_envelope(final)))
        else:
            print(render_emission(name, final, glossary=args.glossary))
        if name in ("ols", "logit") and getattr(args, "plot", False):
            task = session.latest_task()
            if task.latest_plot is not None:
                print(_write_svg(args.out, task.id, final["k"], task.latest_plot),
                      file=sys.stderr)
        return 0

    # plot subcommands
    if name == "hist":
        cols = _columns(args)
        if not cols or len(cols) != 1:
            raise CommandError("hist needs exactly one --col")
        plot = {"kind": "hist", "column": cols[0], "bins": args.bins}
    elif name == "box":
        if not args.y:
            raise CommandError("box needs --y")
        plot = {"kind": "box", "y": args.y, "x": args.x}
    elif name == "gbox":
        if not args.y or not args.x:
            raise CommandError("gbox needs --y and --x")
        plot = {"kind": "gbox", "y": args.y, "x": args.x, "groups": args.groups}
    else:  # bar
        if not args.g:
            raise CommandError("bar needs --g (grouping column)")
        if args.stat != "size" and not args.y:
            raise CommandError("bar mu/std need --y")
        plot = {"kind": args.stat, "y": args.y, "g": args.g}
    plot = {k: v for k, v in plot.items() if v is not None}
    spec = TaskSpec("plot", plan, session.program, plot=plot)
    final = _run_task(session, spec, args)
    if final is None:
        return 2
    task = session.latest_task()
    if args.json:
        print(canonical_json(task.latest_plot.to_json()))
    else:
        print(_write_svg(args.out, task.id, final["k"], task.latest_plot))
    return 0


def _write_svg(outdir: str, task_id: str, k: int, spec) -> str:
    os.makedirs(outdir, exist_ok=True)
    path = os.path.join(outdir, f"{task_id}_{k}.svg")
    with open(path, "w", encoding="utf-8") as f:
        f.write(plotdata.render_svg(spec))
    return path


def _cmd_repl(args) -> int:
    session = _open_session(args)
    h = session.handle
    print(f"opened {h.path}: ~{h.n_estimate} rows, {len(h.header)} columns "
          f"(type 'help' for commands)")
    scripted = not sys.stdin.isatty()
    while True:
        try:
            line = input("pond> " if not scripted else "")
        except EOFError:
            return 0
        except KeyboardInterrupt:
            print()
            continue
        if scripted:
            print(f"pond> {line}")
        try:
            result = run_command(session, line, workers=args.workers)
        except CommandError as exc:
            print(f"error: {exc}")
            continue
        if result.kind == "quit":
            return 0
        if result.kind == "info":
            print(result.message or canonical_json(result.payload))
        elif result.kind == "ok":
            if result.message:
                print(result.message)
        elif result.kind == "task":
            task = result.task
            print(f"[{task.id}] {task.spec.kind} started")
            if scripted:
                _follow(task)
            else:
                threading.Thread(target=_follow, args=(task,), daemon=True).start()


def _follow(task) -> None:
    for emission in task.stream():
        print(render_emission(task.spec.kind, emission))
        if not emission.get("terminal"):
            print()


def _cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    uvicorn.run(create_app(), host=args.host, port=args.port, log_level="warning")
    return 0


if __name__ == "__main__":
    sys.exit(main())
