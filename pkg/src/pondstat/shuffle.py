"""External-memory uniform shuffle of a dataset's rows.

Two passes: scatter every data row to a temp bucket chosen iid-uniform,
then permute each bucket in memory and concatenate. That is equivalent
to sorting by independent uniform keys, so the output permutation is
uniform, while peak memory stays near one bucket (~budget/2).
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .source import DatasetError


class ShuffleError(Exception):
    """Shuffle could not satisfy its memory or format preconditions."""


@dataclass(frozen=True)
class ShuffleReport:
    input_rows: int
    output_rows: int
    buckets: int
    bytes_peak_memory: int
    seed: int


def _iter_lines(f, start, end):
    f.seek(start)
    remaining = end - start
    tail = b""
    while remaining > 0:
        chunk = f.read(min(1 << 20, remaining))
        if not chunk:
            break
        remaining -= len(chunk)
        parts = (tail + chunk).split(b"\n")
        tail = parts.pop()
        yield from parts
    if tail:
        yield tail


def _check_record(line: bytes) -> bytes:
    line = line.rstrip(b"\r")
    if line.count(b'"') % 2 == 1:
        raise ShuffleError("record with embedded newline (unbalanced quote in line)")
    return line


def shuffle_file(in_path, out_path, memory_budget: int, seed: int = 0) -> ShuffleReport:
    """Write a uniformly shuffled copy of in_path to out_path.

    The header line is preserved, data rows are a uniform permutation of
    the input rows, line endings are normalized to \\n, and no more than
    memory_budget bytes of row data are buffered at once. Deterministic
    for a given seed.
    """
    size = os.path.getsize(in_path)
    with open(in_path, "rb") as f:
        header = f.readline()
        if not header:
            raise DatasetError(f"empty file: {in_path}")
        data_start = f.tell()
    if memory_budget < 2:
        raise ShuffleError("memory budget too small")

    rng = np.random.default_rng(seed)
    data_bytes = max(size - data_start, 1)
    n_buckets = max(1, -(-data_bytes // max(memory_budget // 2, 1)))

    tmp_paths = [f"{out_path}.bucket{i}.tmp" for i in range(n_buckets)]
    peak = 0
    in_rows = 0
    out_rows = 0
    try:
        sinks = [open(p, "wb") for p in tmp_paths]
        try:
            with open(in_path, "rb") as f:
                for line in _iter_lines(f, data_start, size):
                    line = _check_record(line)
                    if len(line) + 1 > memory_budget:
                        raise ShuffleError("a single line exceeds the memory budget")
                    in_rows += 1
                    sinks[int(rng.integers(n_buckets))].write(line + b"\n")
        finally:
            for s in sinks:
                s.close()

        with open(out_path, "wb") as out:
            out.write(header.rstrip(b"\r\n") + b"\n" if header.strip() else header)
            for bi in range(n_buckets):
                out_rows_b, peak_b = _drain_bucket(tmp_paths[bi], out, memory_budget, rng)
                out_rows += out_rows_b
                peak = max(peak, peak_b)
    finally:
        for p in tmp_paths:
            try:
                os.remove(p)
            except OSError:
                pass
    return ShuffleReport(input_rows=in_rows, output_rows=out_rows,
                         buckets=n_buckets, bytes_peak_memory=peak, seed=seed)


def _drain_bucket(path, out, memory_budget, rng, depth=0):
    """Permute one bucket into `out`; re-scatters oversized buckets."""
    bucket_size = os.path.getsize(path)
    if bucket_size <= memory_budget:
        with open(path, "rb") as f:
            lines = f.read().split(b"\n")
        if lines and lines[-1] == b"":
            lines.pop()
        for i in rng.permutation(len(lines)):
            out.write(lines[int(i)] + b"\n")
        return len(lines), bucket_size
    if depth > 32:
        raise ShuffleError("bucket split recursion exceeded")
    # oversized bucket: split again with more buckets and recurse
    n_sub = max(2, -(-bucket_size // max(memory_budget // 2, 1)))
    sub_paths = [f"{path}.s{i}" for i in range(n_sub)]
    rows = 0
    peak = 0
    try:
        sinks = [open(p, "wb") for p in sub_paths]
        try:
            with open(path, "rb") as f:
                for line in _iter_lines(f, 0, os.path.getsize(path)):
                    sinks[int(rng.integers(n_sub))].write(line + b"\n")
        finally:
            for s in sinks:
                s.close()
        for p in sub_paths:
            r, pk = _drain_bucket(p, out, memory_budget, rng, depth + 1)
            rows += r
            peak = max(peak, pk)
    finally:
        for p in sub_paths:
            try:
                os.remove(p)
            except OSError:
                pass
    return rows, peak
