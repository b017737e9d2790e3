"""Pure-Python kernel implementations.

Drop-in fallback for the compiled extension in `_ckernels.pyx`; selected
at import time by :mod:`pondstat._kernels` when the extension is missing
or disabled. Semantics are kept bit-compatible with the C version: both
call the same libm routines in the same order, treat the same lexemes as
missing and map every non-finite intermediate to NaN.
"""

from __future__ import annotations

import math

import numpy as np

from . import _ops as ops

IMPL = "python"

_NAN = float("nan")


def _parse_cell(s) -> float:
    """str (or None) -> float; NaN for missing/unparseable/non-finite."""
    if s is None or not s:
        return _NAN
    # '_' and 'x' guards keep parity with strtod (PEP-515 underscores and
    # C99 hex floats diverge between float() and strtod otherwise);
    # non-ASCII whitespace is accepted by float() but not strtod.
    if "x" in s or "X" in s or "_" in s or not s.isascii():
        return _NAN
    try:
        v = float(s)
    except ValueError:
        return _NAN
    return v if math.isfinite(v) else _NAN


def _is_missing_text(s: str) -> bool:
    return s == "" or s.upper() in ("NA", "NAN")


def parse_numeric_cells(cells) -> np.ndarray:
    """Parse a sequence of text cells into float64 with NaN for missing."""
    out = np.empty(len(cells), dtype=np.float64)
    for i, c in enumerate(cells):
        out[i] = _parse_cell(c)
    return out


def parse_block(lines, ncols, qidx, tidx):
    """Split and type raw CSV record lines.

    lines: list of bytes, one record each (trailing newline tolerated).
    qidx/tidx: int32 arrays of file column indices wanted as numeric /
    text. Returns (quant_columns, text_columns, bad_rows) where rows
    containing a quote character or with wrong field count are left for
    the caller to reprocess (values stay NaN/None at those positions).
    """
    nrows = len(lines)
    quants = [np.full(nrows, _NAN, dtype=np.float64) for _ in range(len(qidx))]
    texts = [[None] * nrows for _ in range(len(tidx))]
    bad = []
    for r, raw in enumerate(lines):
        line = raw.rstrip(b"\r\n").decode("utf-8", errors="replace")
        if '"' in line:
            bad.append(r)
            continue
        cells = line.split(",")
        if len(cells) != ncols:
            bad.append(r)
            continue
        for j, fi in enumerate(qidx):
            quants[j][r] = _parse_cell(cells[fi])
        for j, fi in enumerate(tidx):
            cell = cells[fi]
            texts[j][r] = None if _is_missing_text(cell) else cell
    return quants, texts, bad


def moment_sweep(values: np.ndarray):
    """One column pass: (count, mean, m2, m3, m4, min, max).

    Central moments are the 1/n variety; NaN cells are skipped. An
    all-missing column yields count 0 and NaN statistics.
    """
    mask = np.isfinite(values)
    cnt = int(mask.sum())
    if cnt == 0:
        return 0, _NAN, _NAN, _NAN, _NAN, _NAN, _NAN
    vv = values[mask]
    mean = float(vv.sum()) / cnt
    d = vv - mean
    d2 = d * d
    m2 = float(d2.sum()) / cnt
    m3 = float((d2 * d).sum()) / cnt
    m4 = float((d2 * d2).sum()) / cnt
    return cnt, mean, m2, m3, m4, float(vv.min()), float(vv.max())


def _eval_one(code, consts, x: float, stack: list) -> float:
    sp = 0
    for op, arg in code:
        if op == ops.OP_CONST:
            stack[sp] = consts[arg]
            sp += 1
        elif op == ops.OP_X:
            stack[sp] = x
            sp += 1
        elif op == ops.OP_NEG:
            a = stack[sp - 1]
            stack[sp - 1] = -a if a == a else _NAN
        elif op == ops.OP_IF:
            sp -= 2
            b, a, c = stack[sp + 1], stack[sp], stack[sp - 1]
            stack[sp - 1] = _NAN if c != c else (a if c != 0.0 else b)
        elif op in _UNARY_FUNCS:
            a = stack[sp - 1]
            stack[sp - 1] = _NAN if a != a else _UNARY_FUNCS[op](a)
        else:
            sp -= 1
            b, a = stack[sp], stack[sp - 1]
            if a != a or b != b:
                stack[sp - 1] = _NAN
            else:
                stack[sp - 1] = _BINARY_FUNCS[op](a, b)
    return stack[0]


def _guard(f):
    def g(*args):
        try:
            r = f(*args)
        except (ValueError, OverflowError, ZeroDivisionError):
            return _NAN
        return r if math.isfinite(r) else _NAN

    return g


_UNARY_FUNCS = {
    ops.OP_LOG: _guard(math.log),
    ops.OP_LOG1P: _guard(math.log1p),
    ops.OP_EXP: _guard(math.exp),
    ops.OP_ABS: abs,
    ops.OP_SIGN: lambda a: (a > 0) - (a < 0) + 0.0,
    ops.OP_FLOOR: _guard(math.floor),
    ops.OP_CEIL: _guard(math.ceil),
    ops.OP_SQRT: _guard(math.sqrt),
}

_BINARY_FUNCS = {
    ops.OP_ADD: _guard(lambda a, b: a + b),
    ops.OP_SUB: _guard(lambda a, b: a - b),
    ops.OP_MUL: _guard(lambda a, b: a * b),
    ops.OP_DIV: _guard(lambda a, b: a / b),
    ops.OP_POW: _guard(math.pow),
    ops.OP_LT: lambda a, b: 1.0 if a < b else 0.0,
    ops.OP_LE: lambda a, b: 1.0 if a <= b else 0.0,
    ops.OP_GT: lambda a, b: 1.0 if a > b else 0.0,
    ops.OP_GE: lambda a, b: 1.0 if a >= b else 0.0,
    ops.OP_EQ: lambda a, b: 1.0 if a == b else 0.0,
    ops.OP_NE: lambda a, b: 1.0 if a != b else 0.0,
    ops.OP_MIN: lambda a, b: a if a < b else b,
    ops.OP_MAX: lambda a, b: a if a > b else b,
}


def eval_program(code: np.ndarray, consts: np.ndarray, x: np.ndarray, max_stack: int) -> np.ndarray:
    """Run a compiled postfix program over every element of x."""
    code_list = [(int(op), int(arg)) for op, arg in code]
    consts_list = [float(c) for c in consts]
    stack = [0.0] * max(max_stack, 1)
    out = np.empty(len(x), dtype=np.float64)
    for i, xv in enumerate(x):
        out[i] = _eval_one(code_list, consts_list, float(xv), stack)
    return out
