"""Dataset handles for massive line-oriented CSV files.

A handle records byte extents and schema only; row data is never held.
Size is estimated by probing random byte offsets, so opening a 12 GB
file costs a few thousand reads instead of a full pass.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from dataclasses import dataclass, field, replace

import numpy as np

INTERCEPT = "_INTERCEPT_"

QUANTITATIVE = "quantitative"
QUALITATIVE = "qualitative"
DROPPED = "dropped"

DEFAULT_PROBES = 1000


class DatasetError(Exception):
    """Unusable dataset, codebook or schema request."""


def _open_rb(path):
    # indirection so tests can instrument byte reads
    return open(path, "rb", buffering=1 << 20)


@dataclass(frozen=True)
class Codebook:
    """Analyst-provided variable declarations (qlist / drop / scale_level)."""

    qlist: tuple = ()
    drop: tuple = ()
    scale_level: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "qlist", tuple(self.qlist))
        object.__setattr__(self, "drop", tuple(self.drop))
        object.__setattr__(self, "scale_level", dict(self.scale_level))
        qs, ds, ss = set(self.qlist), set(self.drop), set(self.scale_level)
        overlap = (qs & ds) | (qs & ss) | (ds & ss)
        if overlap:
            raise DatasetError(f"codebook lists overlap on: {sorted(overlap)}")

    @classmethod
    def from_dict(cls, d: dict) -> "Codebook":
        unknown = set(d) - {"qlist", "drop", "scale_level"}
        if unknown:
            raise DatasetError(f"unknown codebook keys: {sorted(unknown)}")
        levels = {k: [str(v) for v in vs] for k, vs in d.get("scale_level", {}).items()}
        return cls(qlist=d.get("qlist", ()), drop=d.get("drop", ()), scale_level=levels)

    @classmethod
    def from_file(cls, path) -> "Codebook":
        with open(path, "r", encoding="utf-8") as f:
            return cls.from_dict(json.load(f))

    def validate_against(self, header) -> None:
        known = set(header) | {INTERCEPT}
        for name in (*self.qlist, *self.drop, *self.scale_level):
            if name not in known:
                raise DatasetError(f"codebook name not in header: {name!r}")


@dataclass(frozen=True)
class Schema:
    """Role (quantitative / qualitative / dropped) per column."""

    roles: dict
    levels: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "roles", dict(self.roles))
        object.__setattr__(self, "levels", dict(self.levels))
        if self.roles.get(INTERCEPT) != QUANTITATIVE:
            raise DatasetError(f"{INTERCEPT} must be quantitative")

    def role(self, name: str) -> str:
        try:
            return self.roles[name]
        except KeyError:
            raise DatasetError(f"unknown column: {name!r}") from None

    def columns(self, role=None):
        if role is None:
            return [c for c in self.roles]
        return [c for c, r in self.roles.items() if r == role]

    def active_columns(self):
        return [c for c, r in self.roles.items() if r != DROPPED]


def _schema_from_codebook(header, codebook: Codebook | None) -> Schema:
    roles = {name: QUALITATIVE for name in header}
    levels = {}
    if codebook is not None:
        for name in codebook.qlist:
            if name != INTERCEPT:
                roles[name] = QUANTITATIVE
        for name in codebook.drop:
            roles[name] = DROPPED
        levels = {k: tuple(v) for k, v in codebook.scale_level.items()}
    roles[INTERCEPT] = QUANTITATIVE
    return Schema(roles=roles, levels=levels)


@dataclass(frozen=True)
class DatasetHandle:
    """An opened CSV source. Immutable; draws open their own cursors."""

    path: str
    data_start: int
    data_end: int
    header: tuple
    schema: Schema
    n_estimate: int
    shuffled: bool = False

    def __post_init__(self):
        if self.data_start <= 0:
            raise DatasetError("missing header line")
        if self.data_start > self.data_end:
            raise DatasetError("data_start beyond end of file")

    @property
    def span(self) -> int:
        return self.data_end - self.data_start

    def column_index(self, name: str) -> int:
        try:
            return self.header.index(name)
        except ValueError:
            raise DatasetError(f"unknown column: {name!r}") from None


def _read_header(path):
    with _open_rb(path) as f:
        first = f.readline()
        if not first:
            raise DatasetError(f"empty file: {path}")
        data_start = f.tell()
        f.seek(0, os.SEEK_END)
        data_end = f.tell()
    text = first.decode("utf-8", errors="replace").lstrip("﻿").rstrip("\r\n")
    names = next(csv.reader(io.StringIO(text)))
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DatasetError(f"duplicate header names: {dupes}")
    if INTERCEPT in names:
        raise DatasetError(f"file column collides with injected {INTERCEPT}")
    if not names or all(n == "" for n in names):
        raise DatasetError("header line has no column names")
    return tuple(names), data_start, data_end


def open_dataset(path, source_type: str = "no_codebook", codebook: Codebook | dict | None = None,
                 probes: int = DEFAULT_PROBES, exact_count: bool = False,
                 shuffled: bool | None = None) -> DatasetHandle:
    """Open a CSV dataset and describe it without reading it fully.

    source_type "no_codebook" treats every file column as qualitative;
    "with_codebook" requires `codebook` and derives roles from it. With
    exact_count=True the row count comes from a full pass (slow on
    purpose, off by default).
    """
    if not os.path.exists(path):
        raise DatasetError(f"no such file: {path}")
    if source_type not in ("no_codebook", "with_codebook"):
        raise DatasetError(f"unknown source type: {source_type!r}")
    if source_type == "with_codebook":
        if codebook is None:
            raise DatasetError("source type 'with_codebook' needs a codebook")
        if isinstance(codebook, dict):
            codebook = Codebook.from_dict(codebook)
    elif codebook is not None:
        raise DatasetError("codebook given but source type is 'no_codebook'")

    header, data_start, data_end = _read_header(path)
    if codebook is not None:
        codebook.validate_against(header)
    schema = _schema_from_codebook(header, codebook)
    if shuffled is None:
        shuffled = ".shuffle" in os.path.basename(path)
    handle = DatasetHandle(path=str(path), data_start=data_start, data_end=data_end,
                           header=header, schema=schema, n_estimate=0, shuffled=shuffled)
    if data_end > data_start:
        n = count_rows_exact(handle) if exact_count else estimate_row_count(handle, probes)
        handle = replace(handle, n_estimate=n)
    return handle


def estimate_row_count(handle: DatasetHandle, probes: int = DEFAULT_PROBES, seed: int = 0) -> int:
    """Estimate the data row count from `probes` random byte offsets.

    Each probe seeks to a uniform offset, skips the partial line there
    and measures the next full line (wrapping to the first data line at
    EOF); measuring the line that merely contains the offset would be
    length-biased. Exact for constant-length lines.
    """
    if probes < 1:
        raise DatasetError("probes must be >= 1")
    span = handle.span
    if span <= 0:
        return 0
    rng = np.random.default_rng(seed)
    offsets = handle.data_start + rng.integers(0, span, size=probes)
    total = 0
    with _open_rb(handle.path) as f:
        for off in offsets:
            f.seek(int(off))
            f.readline()
            if f.tell() >= handle.data_end:
                f.seek(handle.data_start)
            line = f.readline()
            if not line:
                raise DatasetError(f"unreadable data region at offset {int(off)}")
            total += len(line)
    return int(round(span / (total / probes)))


def count_rows_exact(handle: DatasetHandle) -> int:
    """Full-pass row count (violates the interactivity budget; explicit opt-in)."""
    count = 0
    last = b"\n"
    with _open_rb(handle.path) as f:
        f.seek(handle.data_start)
        remaining = handle.span
        while remaining > 0:
            chunk = f.read(min(1 << 20, remaining))
            if not chunk:
                break
            remaining -= len(chunk)
            count += chunk.count(b"\n")
            last = chunk[-1:]
    if last != b"\n":
        count += 1  # final line without trailing newline
    return count


def update_schema(handle: DatasetHandle, qlist=None, drop=None) -> DatasetHandle:
    """Reassign column roles; qlist/drop each REPLACE the current set when given."""
    known = set(handle.header) | {INTERCEPT}
    current_drop = {c for c, r in handle.schema.roles.items() if r == DROPPED}
    current_q = {c for c, r in handle.schema.roles.items() if r == QUANTITATIVE}

    new_q = current_q if qlist is None else set(qlist)
    new_drop = current_drop if drop is None else set(drop)
    for name in new_q | new_drop:
        if name not in known:
            raise DatasetError(f"unknown column: {name!r}")
    if INTERCEPT in new_drop:
        raise DatasetError(f"cannot drop {INTERCEPT}")

    roles = {}
    for name in handle.header:
        if name in new_drop:
            roles[name] = DROPPED
        elif name in new_q:
            roles[name] = QUANTITATIVE
        else:
            roles[name] = QUALITATIVE
    roles[INTERCEPT] = QUANTITATIVE
    levels = {k: v for k, v in handle.schema.levels.items() if roles.get(k) != DROPPED}
    return replace(handle, schema=Schema(roles=roles, levels=levels))
