import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))


def write_csv(path, header, rows):
    """Small-fixture writer: rows of already-formatted cell strings."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(header) + "\n")
        for row in rows:
            f.write(",".join(str(c) for c in row) + "\n")
    return str(path)


def write_csv_fast(path, header, arrays, fmt="%.6f"):
    """Bulk writer for large numeric fixtures (vectorized formatting)."""
    fmts = [fmt] * len(arrays) if isinstance(fmt, str) else list(fmt)
    cols = [np.char.mod(f, np.asarray(a)) for f, a in zip(fmts, arrays)]
    merged = cols[0]
    for c in cols[1:]:
        merged = np.char.add(np.char.add(merged, ","), c)
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join(header) + "\n")
        f.write("\n".join(merged.tolist()))
        f.write("\n")
    return str(path)


@pytest.fixture()
def tiny_csv(tmp_path):
    """10 distinct rows, two quantitative columns and one text column."""
    rows = [(i, 10.0 * i + 0.5, "abcde"[i % 5]) for i in range(10)]
    return write_csv(tmp_path / "tiny.csv", ["key", "val", "grp"], rows)


@pytest.fixture(scope="session")
def medium_numeric_csv(tmp_path_factory):
    """2000 shuffled lognormal rows with ~5% missing in `noisy`."""
    rng = np.random.default_rng(99)
    n = 2000
    value = np.round(np.exp(rng.normal(6.0, 0.8, n)), 3)
    other = np.round(rng.normal(50.0, 10.0, n), 3)
    noisy = np.char.mod("%.3f", rng.normal(0, 1, n)).astype(object)
    noisy[rng.random(n) < 0.05] = "NA"
    path = tmp_path_factory.mktemp("data") / "medium.csv"
    with open(path, "w", encoding="utf-8") as f:
        f.write("value,other,noisy\n")
        for v, o, m in zip(value, other, noisy):
            f.write(f"{v},{o},{m}\n")
    return str(path)
