import os

import pytest

from pondstat import shuffle_file
from pondstat.shuffle import ShuffleError

from conftest import write_csv


def _lines(path):
    with open(path, "rb") as f:
        return f.read().split(b"\n")


def test_multiset_and_header_preserved(tmp_path):
    rows = [[i, f"name{i}", i * 3.5] for i in range(100)]
    src = write_csv(tmp_path / "in.csv", ["a", "b", "c"], rows)
    out = tmp_path / "out.csv"
    # budget forcing ~8 buckets: data ~ 100 * 16B = 1.6kB, budget 400 -> 8 buckets
    report = shuffle_file(src, out, memory_budget=400, seed=5)
    assert report.buckets >= 8
    assert report.input_rows == report.output_rows == 100
    src_lines = _lines(src)
    out_lines = _lines(out)
    assert out_lines[0] == src_lines[0]  # header
    assert sorted(out_lines[1:]) == sorted(src_lines[1:])  # byte-exact multiset
    assert out_lines[1:-1] != src_lines[1:-1]  # actually permuted
    assert report.bytes_peak_memory <= 400


def test_singleton_file(tmp_path):
    src = write_csv(tmp_path / "one.csv", ["a"], [[42]])
    out = tmp_path / "one.out.csv"
    shuffle_file(src, out, memory_budget=1024, seed=0)
    assert _lines(out) == [b"a", b"42", b""]


def test_deterministic_given_seed(tmp_path):
    src = write_csv(tmp_path / "d.csv", ["a"], [[i] for i in range(50)])
    out1, out2, out3 = (tmp_path / f"o{i}.csv" for i in range(3))
    shuffle_file(src, out1, memory_budget=256, seed=7)
    shuffle_file(src, out2, memory_budget=256, seed=7)
    shuffle_file(src, out3, memory_budget=256, seed=8)
    assert out1.read_bytes() == out2.read_bytes()
    assert out1.read_bytes() != out3.read_bytes()


def test_single_line_exceeding_budget_errors(tmp_path):
    src = write_csv(tmp_path / "wide.csv", ["a"], [["x" * 1000]])
    with pytest.raises(ShuffleError, match="exceeds the memory budget"):
        shuffle_file(src, tmp_path / "w.out", memory_budget=100, seed=0)


def test_embedded_newline_record_rejected(tmp_path):
    p = tmp_path / "q.csv"
    p.write_text('a,b\n1,"x\ny"\n')
    with pytest.raises(ShuffleError, match="embedded newline"):
        shuffle_file(p, tmp_path / "q.out", memory_budget=1024, seed=0)


def test_temp_buckets_removed(tmp_path):
    src = write_csv(tmp_path / "t.csv", ["a"], [[i] for i in range(100)])
    out = tmp_path / "t.out.csv"
    shuffle_file(src, out, memory_budget=128, seed=1)
    leftovers = [f for f in os.listdir(tmp_path) if ".tmp" in f or ".s" in f.split(".")[-1]]
    assert leftovers == []


def test_crlf_normalized(tmp_path):
    p = tmp_path / "crlf.csv"
    p.write_bytes(b"a,b\r\n1,2\r\n3,4\r\n")
    out = tmp_path / "crlf.out.csv"
    shuffle_file(p, out, memory_budget=1024, seed=0)
    lines = _lines(out)
    assert lines[0] == b"a,b"
    assert sorted(lines[1:3]) == [b"1,2", b"3,4"]


def test_uniformity_small_chi_square(tmp_path):
    """Cheap sanity version of the acceptance chi-square (300 shuffles)."""
    from scipy import stats as sps

    n = 20
    src = write_csv(tmp_path / "u.csv", ["a"], [[i] for i in range(n)])
    counts = [0] * n
    for seed in range(300):
        out = tmp_path / "u.out.csv"
        shuffle_file(src, out, memory_budget=4096, seed=seed)
        pos = _lines(out)[1:-1].index(b"0")
        counts[pos] += 1
    chi2 = sum((c - 300 / n) ** 2 / (300 / n) for c in counts)
    assert sps.chi2.sf(chi2, n - 1) > 0.001
