# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the per-replicate hot path.

Semantics must stay bit-compatible with `_pykernels` (same libm calls in
the same order, same missing-value rules); the pure-Python module is the
reference for behavior, this one exists for speed.
"""

from libc.math cimport ceil, exp, fabs, floor, isfinite, isnan, log, log1p, pow, sqrt
from libc.stdlib cimport free, malloc, strtod
from libc.string cimport memchr, memcpy

from cpython.bytes cimport PyBytes_AsStringAndSize

import numpy as np

from . import _ops as ops

IMPL = "c"

cdef double _NAN = float("nan")

cdef int OP_CONST = ops.OP_CONST
cdef int OP_X = ops.OP_X
cdef int OP_NEG = ops.OP_NEG
cdef int OP_ADD = ops.OP_ADD
cdef int OP_SUB = ops.OP_SUB
cdef int OP_MUL = ops.OP_MUL
cdef int OP_DIV = ops.OP_DIV
cdef int OP_POW = ops.OP_POW
cdef int OP_LT = ops.OP_LT
cdef int OP_LE = ops.OP_LE
cdef int OP_GT = ops.OP_GT
cdef int OP_GE = ops.OP_GE
cdef int OP_EQ = ops.OP_EQ
cdef int OP_NE = ops.OP_NE
cdef int OP_LOG = ops.OP_LOG
cdef int OP_LOG1P = ops.OP_LOG1P
cdef int OP_EXP = ops.OP_EXP
cdef int OP_ABS = ops.OP_ABS
cdef int OP_SIGN = ops.OP_SIGN
cdef int OP_FLOOR = ops.OP_FLOOR
cdef int OP_CEIL = ops.OP_CEIL
cdef int OP_SQRT = ops.OP_SQRT
cdef int OP_MIN = ops.OP_MIN
cdef int OP_MAX = ops.OP_MAX
cdef int OP_IF = ops.OP_IF


cdef inline bint _is_ws(unsigned char ch) nogil:
    return ch == 32 or (9 <= ch <= 13)


cdef double _parse_cell_c(const char* s, Py_ssize_t n):
    """Numeric cell -> double; NaN for missing/unparseable/non-finite."""
    cdef Py_ssize_t i
    cdef unsigned char ch
    if n == 0:
        return _NAN
    for i in range(n):
        ch = <unsigned char>s[i]
        # reject what float() and strtod disagree on: hex floats,
        # PEP-515 underscores, non-ASCII whitespace
        if ch >= 128 or ch == 120 or ch == 88 or ch == 95:  # x X _
            return _NAN
    cdef char sbuf[64]
    cdef char* buf = sbuf
    if n >= 64:
        buf = <char*>malloc(n + 1)
        if buf == NULL:
            raise MemoryError()
    memcpy(buf, s, n)
    buf[n] = 0
    cdef char* endp = NULL
    cdef double v = strtod(buf, &endp)
    cdef bint ok = endp != buf
    while ok and endp < buf + n:
        if _is_ws(<unsigned char>endp[0]):
            endp += 1
        else:
            ok = False
    if n >= 64:
        free(buf)
    if not ok or not isfinite(v):
        return _NAN
    return v


def parse_numeric_cells(cells):
    """Parse a sequence of text cells into float64 with NaN for missing."""
    cdef Py_ssize_t n = len(cells), i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    cdef bytes b
    for i in range(n):
        c = cells[i]
        if c is None:
            ov[i] = _NAN
            continue
        b = (<str>c).encode("utf-8", "replace")
        ov[i] = _parse_cell_c(b, len(b))
    return out


cdef object _text_cell(const char* s, Py_ssize_t n):
    if n == 0:
        return None
    if n == 2 and (s[0] == 78 or s[0] == 110) and (s[1] == 65 or s[1] == 97):
        return None  # NA
    if n == 3 and (s[0] == 78 or s[0] == 110) and (s[1] == 65 or s[1] == 97) \
            and (s[2] == 78 or s[2] == 110):
        return None  # NAN
    return s[:n].decode("utf-8", "replace")


def parse_block(list lines, Py_ssize_t ncols, qidx, tidx):
    """Split and type raw CSV record lines (see _pykernels.parse_block)."""
    cdef Py_ssize_t nrows = len(lines)
    cdef int[::1] qv = np.ascontiguousarray(qidx, dtype=np.int32)
    cdef int[::1] tv = np.ascontiguousarray(tidx, dtype=np.int32)
    cdef Py_ssize_t nq = qv.shape[0], nt = tv.shape[0]
    quant_mat = np.full((nq, nrows), _NAN, dtype=np.float64)
    cdef double[:, ::1] qm = quant_mat
    texts = [[None] * nrows for _ in range(nt)]
    bad = []

    cdef Py_ssize_t* starts = <Py_ssize_t*>malloc((ncols + 2) * sizeof(Py_ssize_t))
    cdef Py_ssize_t* ends = <Py_ssize_t*>malloc((ncols + 2) * sizeof(Py_ssize_t))
    if starts == NULL or ends == NULL:
        free(starts)
        free(ends)
        raise MemoryError()

    cdef Py_ssize_t r, n, i, f, fi
    cdef char* p
    cdef bint overflow
    try:
        for r in range(nrows):
            PyBytes_AsStringAndSize(lines[r], &p, &n)
            while n > 0 and (p[n - 1] == 10 or p[n - 1] == 13):
                n -= 1
            if memchr(p, 34, n) != NULL:  # '"'
                bad.append(r)
                continue
            f = 0
            starts[0] = 0
            overflow = False
            for i in range(n):
                if p[i] == 44:  # ','
                    ends[f] = i
                    f += 1
                    if f >= ncols:
                        overflow = True
                        break
                    starts[f] = i + 1
            if overflow or f != ncols - 1:
                bad.append(r)
                continue
            ends[f] = n
            for i in range(nq):
                fi = qv[i]
                qm[i, r] = _parse_cell_c(p + starts[fi], ends[fi] - starts[fi])
            for i in range(nt):
                fi = tv[i]
                (<list>texts[i])[r] = _text_cell(p + starts[fi], ends[fi] - starts[fi])
    finally:
        free(starts)
        free(ends)
    return [quant_mat[j] for j in range(nq)], texts, bad


def moment_sweep(values):
    """One column pass: (count, mean, m2, m3, m4, min, max)."""
    arr = np.ascontiguousarray(values, dtype=np.float64)
    cdef double[::1] v = arr
    cdef Py_ssize_t n = v.shape[0], i
    cdef Py_ssize_t cnt = 0
    cdef double s = 0.0, mn = 0.0, mx = 0.0, x, d, d2
    cdef bint first = True
    for i in range(n):
        x = v[i]
        if isnan(x):
            continue
        cnt += 1
        s += x
        if first:
            mn = x
            mx = x
            first = False
        else:
            if x < mn:
                mn = x
            if x > mx:
                mx = x
    if cnt == 0:
        return 0, _NAN, _NAN, _NAN, _NAN, _NAN, _NAN
    cdef double mean = s / cnt
    cdef double s2 = 0.0, s3 = 0.0, s4 = 0.0
    for i in range(n):
        x = v[i]
        if isnan(x):
            continue
        d = x - mean
        d2 = d * d
        s2 += d2
        s3 += d2 * d
        s4 += d2 * d2
    return cnt, mean, s2 / cnt, s3 / cnt, s4 / cnt, mn, mx


def eval_program(code, consts, x, int max_stack):
    """Run a compiled postfix program over every element of x."""
    cdef int[:, ::1] cd = np.ascontiguousarray(code, dtype=np.int32)
    cdef double[::1] cs = np.ascontiguousarray(consts, dtype=np.float64)
    arr = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] xv = arr
    cdef Py_ssize_t n = xv.shape[0], m = cd.shape[0], i, j
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] ov = out
    if max_stack < 1:
        max_stack = 1
    cdef double* stack = <double*>malloc(max_stack * sizeof(double))
    if stack == NULL:
        raise MemoryError()
    cdef int sp, op, arg
    cdef double a, b, c, r
    try:
        for i in range(n):
            sp = 0
            for j in range(m):
                op = cd[j, 0]
                arg = cd[j, 1]
                if op == OP_CONST:
                    stack[sp] = cs[arg]
                    sp += 1
                elif op == OP_X:
                    stack[sp] = xv[i]
                    sp += 1
                elif op == OP_NEG:
                    a = stack[sp - 1]
                    stack[sp - 1] = -a if a == a else _NAN
                elif op == OP_IF:
                    sp -= 2
                    b = stack[sp + 1]
                    a = stack[sp]
                    c = stack[sp - 1]
                    stack[sp - 1] = _NAN if c != c else (a if c != 0.0 else b)
                elif op == OP_LOG or op == OP_LOG1P or op == OP_EXP or op == OP_ABS \
                        or op == OP_SIGN or op == OP_FLOOR or op == OP_CEIL or op == OP_SQRT:
                    a = stack[sp - 1]
                    if a != a:
                        r = _NAN
                    elif op == OP_LOG:
                        r = log(a)
                    elif op == OP_LOG1P:
                        r = log1p(a)
                    elif op == OP_EXP:
                        r = exp(a)
                    elif op == OP_ABS:
                        r = fabs(a)
                    elif op == OP_SIGN:
                        r = (a > 0) - (a < 0)
                    elif op == OP_FLOOR:
                        r = floor(a)
                    elif op == OP_CEIL:
                        r = ceil(a)
                    else:
                        r = sqrt(a)
                    stack[sp - 1] = r if isfinite(r) else _NAN
                else:
                    sp -= 1
                    b = stack[sp]
                    a = stack[sp - 1]
                    if a != a or b != b:
                        stack[sp - 1] = _NAN
                    elif op == OP_LT:
                        stack[sp - 1] = 1.0 if a < b else 0.0
                    elif op == OP_LE:
                        stack[sp - 1] = 1.0 if a <= b else 0.0
                    elif op == OP_GT:
                        stack[sp - 1] = 1.0 if a > b else 0.0
                    elif op == OP_GE:
                        stack[sp - 1] = 1.0 if a >= b else 0.0
                    elif op == OP_EQ:
                        stack[sp - 1] = 1.0 if a == b else 0.0
                    elif op == OP_NE:
                        stack[sp - 1] = 1.0 if a != b else 0.0
                    elif op == OP_MIN:
                        stack[sp - 1] = a if a < b else b
                    elif op == OP_MAX:
                        stack[sp - 1] = a if a > b else b
                    else:
                        if op == OP_ADD:
                            r = a + b
                        elif op == OP_SUB:
                            r = a - b
                        elif op == OP_MUL:
                            r = a * b
                        elif op == OP_DIV:
                            r = a / b if b != 0.0 else _NAN
                        else:
                            r = pow(a, b)
                        stack[sp - 1] = r if isfinite(r) else _NAN
            ov[i] = stack[0]
    finally:
        free(stack)
    return out
