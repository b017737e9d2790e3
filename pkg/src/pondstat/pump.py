"""Subsample draws: sequential block reads or random byte seeks.

A draw never materializes the file; it holds at most n parsed rows plus
one I/O buffer. Draws are pure functions of (handle, n, seed), so
replicates can run concurrently and still reproduce exactly.
"""

from __future__ import annotations

import csv
import hashlib
import io
import struct
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .source import (DROPPED, INTERCEPT, QUALITATIVE, QUANTITATIVE,
                     DatasetError, DatasetHandle, _open_rb)

_CHUNK = 1 << 20


class DrawError(Exception):
    """A subsample draw failed (I/O or malformed data beyond tolerance)."""


@dataclass(frozen=True)
class SamplingPlan:
    """How to subsample: size n, replicate budget, mode, stop rule, seed."""

    n: int
    k_max: int = 1
    sequential: bool = True
    se_target: float | None = None  # display units (SE x 100)
    master_seed: int = 0

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("subsample size n must be >= 1")
        if self.k_max < 1:
            raise ValueError("k_max must be >= 1")
        if self.se_target is not None and not self.se_target > 0:
            raise ValueError("se_target must be > 0")


def replicate_seed(master_seed: int, k: int, salt: str = "") -> int:
    """Stable 64-bit per-replicate seed; identical across platforms and runs."""
    payload = struct.pack("<qq", master_seed & (2**63 - 1), k) + salt.encode()
    return int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little")


@dataclass
class Frame:
    """One replicate's parsed rows: typed columns plus _INTERCEPT_."""

    k: int
    n_rows: int
    quant: dict = field(default_factory=dict)   # name -> float64 ndarray (NaN = missing)
    qual: dict = field(default_factory=dict)    # name -> list of str|None
    order: list = field(default_factory=list)
    discarded: int = 0

    def is_quant(self, name: str) -> bool:
        return name in self.quant

    def column_names(self):
        return list(self.order)

    def numeric(self, name: str) -> np.ndarray:
        """Column as float64, parsing text cells if needed (mp semantics)."""
        if name in self.quant:
            return self.quant[name]
        if name in self.qual:
            return _kernels.parse_numeric_cells(self.qual[name])
        raise DatasetError(f"column not in frame: {name!r}")

    def text(self, name: str) -> list:
        """Column as text levels (numbers formatted compactly), None = missing."""
        if name in self.qual:
            return self.qual[name]
        if name in self.quant:
            return [None if v != v else _format_level(v) for v in self.quant[name]]
        raise DatasetError(f"column not in frame: {name!r}")

    def replace_column(self, name: str, values, quantitative: bool) -> None:
        if name not in self.order:
            self.order.append(name)
        self.quant.pop(name, None)
        self.qual.pop(name, None)
        if quantitative:
            self.quant[name] = values
        else:
            self.qual[name] = values

    def drop_column(self, name: str) -> None:
        self.quant.pop(name, None)
        self.qual.pop(name, None)
        self.order.remove(name)

    def copy(self) -> "Frame":
        return Frame(k=self.k, n_rows=self.n_rows, quant=dict(self.quant),
                     qual=dict(self.qual), order=list(self.order), discarded=self.discarded)


def _format_level(v: float) -> str:
    return str(int(v)) if v == int(v) and abs(v) < 1e15 else repr(v)


def resolve_roles(handle: DatasetHandle, needed=None, text_override=()):
    """Map of column -> role for a draw: which file columns to parse, and how."""
    roles = {}
    for name in (*handle.header, INTERCEPT):
        role = handle.schema.role(name)
        if role == DROPPED:
            continue
        if needed is not None and name not in needed:
            continue
        roles[name] = QUALITATIVE if name in text_override else role
    return roles


def parse_frame(lines, handle: DatasetHandle, roles=None, k: int = 1) -> Frame:
    """Parse raw record lines into a typed Frame per column roles.

    Rows whose field count does not match the header are discarded and
    counted; more than 1% discards warns, more than 50% raises.
    """
    if roles is None:
        roles = resolve_roles(handle)
    ncols = len(handle.header)
    want_intercept = INTERCEPT in roles
    names = [n for n in roles if n != INTERCEPT]
    qnames = [n for n in names if roles[n] == QUANTITATIVE]
    tnames = [n for n in names if roles[n] == QUALITATIVE]
    qidx = np.array([handle.column_index(n) for n in qnames], dtype=np.int32)
    tidx = np.array([handle.column_index(n) for n in tnames], dtype=np.int32)

    quants, texts, bad = _kernels.parse_block(list(lines), ncols, qidx, tidx)

    discard = []
    if bad:
        cells_of = {}
        for r in bad:
            row = lines[r].rstrip(b"\r\n").decode("utf-8", errors="replace")
            cells = next(csv.reader(io.StringIO(row))) if row else []
            if len(cells) != ncols:
                discard.append(r)
                continue
            cells_of[r] = cells
        from ._kernels import _pykernels

        for r, cells in cells_of.items():
            for j, fi in enumerate(qidx):
                quants[j][r] = _pykernels._parse_cell(cells[fi])
            for j, fi in enumerate(tidx):
                cell = cells[fi]
                texts[j][r] = None if _pykernels._is_missing_text(cell) else cell

    n_read = len(lines)
    if discard:
        if n_read and len(discard) > 0.5 * n_read:
            raise DrawError(f"{len(discard)}/{n_read} rows malformed (field count != {ncols})")
        if n_read and len(discard) > 0.01 * n_read:
            warnings.warn(f"discarded {len(discard)}/{n_read} malformed rows", stacklevel=2)
        keep = np.ones(n_read, dtype=bool)
        keep[discard] = False
        quants = [q[keep] for q in quants]
        texts = [[t for t, kp in zip(col, keep) if kp] for col in texts]

    n_kept = n_read - len(discard)
    frame = Frame(k=k, n_rows=n_kept, discarded=len(discard))
    for name in names:
        if roles[name] == QUANTITATIVE:
            frame.quant[name] = quants[qnames.index(name)]
        else:
            frame.qual[name] = texts[tnames.index(name)]
        frame.order.append(name)
    if want_intercept:
        frame.quant[INTERCEPT] = np.ones(n_kept, dtype=np.float64)
        frame.order.append(INTERCEPT)
    return frame


def _read_lines_between(f, start, stop, out, limit):
    """Append full lines from [start, stop) to out, up to limit lines."""
    f.seek(start)
    remaining = stop - start
    tail = b""
    while remaining > 0 and len(out) < limit:
        chunk = f.read(min(_CHUNK, remaining))
        if not chunk:
            break
        remaining -= len(chunk)
        parts = (tail + chunk).split(b"\n")
        tail = parts.pop()
        out.extend(parts)
    if tail and remaining == 0 and len(out) < limit:
        out.append(tail)  # final line without trailing newline


def draw_sequential(handle: DatasetHandle, n: int, seed: int, roles=None, k: int = 1) -> Frame:
    """Read n consecutive data lines from a random start, wrapping once.

    On a pre-shuffled file this is statistically equivalent to random
    subsampling but costs one seek. With n >= N every row appears
    exactly once (the frame is a rotation of the file).
    """
    if n < 1:
        raise DrawError("n must be >= 1")
    if handle.span <= 0:
        raise DrawError("dataset has no data rows")
    rng = np.random.default_rng(seed)
    offset = handle.data_start + int(rng.integers(handle.span))
    lines: list = []
    with _open_rb(handle.path) as f:
        f.seek(offset)
        f.readline()  # advance to next line start
        start = f.tell()
        if start >= handle.data_end:
            start = handle.data_start
        _read_lines_between(f, start, handle.data_end, lines, n)
        if len(lines) < n and start > handle.data_start:
            _read_lines_between(f, handle.data_start, start, lines, n)
    return parse_frame(lines[:n], handle, roles, k=k)


def _line_containing(f, offset, data_start):
    """The full line containing byte `offset` (start found by backward scan)."""
    f.seek(offset)
    rest = f.readline()
    parts = []
    pos = offset
    while pos > data_start:
        step = min(4096, pos - data_start)
        f.seek(pos - step)
        buf = f.read(step)
        cut = buf.rfind(b"\n")
        if cut >= 0:
            parts.append(buf[cut + 1:])
            break
        parts.append(buf)
        pos -= step
    prefix = b"".join(reversed(parts))
    return prefix + rest


def draw_random_access(handle: DatasetHandle, n: int, seed: int, roles=None, k: int = 1,
                       use_index: bool = False) -> Frame:
    """Sample n rows with replacement by seeking to random byte offsets.

    The default (index-free) mode selects the line containing each
    offset, which oversamples long lines in proportion to their byte
    length. use_index=True reads the `.lix` sidecar (see
    build_line_index) for exact uniform row selection.
    """
    if n < 1:
        raise DrawError("n must be >= 1")
    if handle.span <= 0:
        raise DrawError("dataset has no data rows")
    rng = np.random.default_rng(seed)
    lines = []
    with _open_rb(handle.path) as f:
        if use_index:
            starts = load_line_index(handle)
            rows = rng.integers(0, len(starts), size=n)
            for r in rows:
                f.seek(int(starts[r]))
                lines.append(f.readline())
        else:
            offsets = handle.data_start + rng.integers(0, handle.span, size=n)
            for off in offsets:
                lines.append(_line_containing(f, int(off), handle.data_start))
    return parse_frame(lines, handle, roles, k=k)


def index_path(handle: DatasetHandle) -> str:
    return handle.path + ".lix"


def build_line_index(handle: DatasetHandle) -> int:
    """One full pass recording every data-line start offset (little-endian u64)."""
    starts = []
    pos = handle.data_start
    with _open_rb(handle.path) as f:
        f.seek(pos)
        tail = b""
        base = pos
        while True:
            chunk = f.read(_CHUNK)
            if not chunk:
                break
            data = tail + chunk
            line_start = 0
            while True:
                cut = data.find(b"\n", line_start)
                if cut < 0:
                    break
                starts.append(base - len(tail) + line_start)
                line_start = cut + 1
            tail = data[line_start:]
            base = f.tell()
        if tail:
            starts.append(base - len(tail))
    arr = np.array(starts, dtype="<i8")
    arr.tofile(index_path(handle))
    return len(starts)


def load_line_index(handle: DatasetHandle) -> np.ndarray:
    try:
        return np.fromfile(index_path(handle), dtype="<i8")
    except FileNotFoundError:
        raise DrawError(f"line index not built: {index_path(handle)}") from None


def draw(handle: DatasetHandle, plan: SamplingPlan, k: int, roles=None) -> Frame:
    """Replicate k's frame under `plan` (seed derived from the master seed)."""
    seed = replicate_seed(plan.master_seed, k)
    if plan.sequential:
        return draw_sequential(handle, plan.n, seed, roles, k=k)
    return draw_random_access(handle, plan.n, seed, roles, k=k)
