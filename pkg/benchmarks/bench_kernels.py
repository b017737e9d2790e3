#!/usr/bin/env python3
"""Benchmark the compiled kernels against the pure-Python fallback.

Times the three hot paths on replicate-sized inputs (CSV block parsing,
moment sweeps, expression programs) and prints a speedup table.

    python benchmarks/bench_kernels.py [--rows 100000] [--repeat 3]
"""

import argparse
import time

import numpy as np

from pondstat import _kernels
from pondstat.transform import compile_expr, parse_expr


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def make_lines(rows, seed=0):
    rng = np.random.default_rng(seed)
    a = rng.normal(1000, 300, rows)
    b = rng.integers(0, 7, rows)
    c = rng.choice(["alpha", "beta", "gamma", "NA"], rows)
    d = rng.lognormal(6, 0.8, rows)
    return [f"{a[i]:.3f},{b[i]},{c[i]},{d[i]:.2f}\n".encode() for i in range(rows)]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--rows", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    impls = _kernels.implementations()
    if len(impls) < 2:
        print("compiled kernels not built; only the fallback is importable")

    lines = make_lines(args.rows)
    qidx = np.array([0, 1, 3], dtype=np.int32)
    tidx = np.array([2], dtype=np.int32)

    rng = np.random.default_rng(1)
    values = rng.normal(0, 500, args.rows)
    values[rng.random(args.rows) < 0.02] = np.nan
    ce = compile_expr(parse_expr("sign(x)*log1p(abs(x))"))

    benches = [
        ("parse_block (4 cols)", lambda m: m.parse_block(lines, 4, qidx, tidx)),
        ("moment_sweep", lambda m: m.moment_sweep(values)),
        ("eval_program sign*log1p", lambda m: m.eval_program(ce.code, ce.consts,
                                                             values, ce.max_stack)),
    ]

    print(f"rows = {args.rows}, best of {args.repeat}\n")
    print(f"{'kernel':28s}" + "".join(f"{m.IMPL:>12s}" for m in impls) + f"{'speedup':>10s}")
    for name, fn in benches:
        times = [_time(lambda m=m: fn(m), args.repeat) for m in impls]
        cells = "".join(f"{t * 1e3:10.1f}ms" for t in times)
        speedup = f"{times[-1] / times[0]:9.1f}x" if len(times) > 1 else "       n/a"
        print(f"{name:28s}{cells}{speedup}")


if __name__ == "__main__":
    main()
