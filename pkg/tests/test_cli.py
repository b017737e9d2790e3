import io
import json
import os
import sys

import numpy as np
import pytest

from pondstat.cli import main

from conftest import write_csv


def run_cli(argv, stdin_text=None, capsys=None):
    if stdin_text is not None:
        old = sys.stdin
        sys.stdin = io.StringIO(stdin_text)
        try:
            code = main(argv)
        finally:
            sys.stdin = old
    else:
        code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture()
def const_csv(tmp_path):
    rows = [[f"{i:05d}", f"{i % 9}"] for i in range(1000)]
    return write_csv(tmp_path / "const.csv", ["key", "val"], rows)


def test_size_constant_rows(const_csv, capsys):
    code, out, err = run_cli(["size", const_csv], capsys=capsys)
    assert code == 0
    assert out.strip() == "1000"


def test_size_exact(const_csv, capsys):
    code, out, _ = run_cli(["size", const_csv, "--exact"], capsys=capsys)
    assert code == 0 and out.strip() == "1000"


def test_usage_error_exit_1(capsys):
    code, _, _ = run_cli(["stats"], capsys=capsys)  # missing data arg
    assert code == 1
    code, _, _ = run_cli(["nosuchcommand"], capsys=capsys)
    assert code == 1


def test_data_error_exit_2(tmp_path, capsys):
    code, _, err = run_cli(["size", str(tmp_path / "missing.csv")], capsys=capsys)
    assert code == 2
    assert "no such file" in err


def test_stats_json_deterministic(medium_numeric_csv, capsys):
    argv = ["stats", medium_numeric_csv, "--col", "value", "--subsize", "300",
            "--niter", "4", "--seed", "17", "--json"]
    code1, out1, err1 = run_cli(argv, capsys=capsys)
    code2, out2, _ = run_cli(argv, capsys=capsys)
    assert code1 == code2 == 0
    assert out1 == out2  # byte-identical stdout
    assert "seed = 17" in err1
    payload = json.loads(out1)
    assert payload["k"] == 4 and payload["n"] == 300
    assert "elapsed_s" not in payload
    assert set(payload["value"]) == {"mu", "se", "std", "min", "med", "max",
                                     "skew", "kurt", "mp"}


def test_stats_serial_matches_concurrent(medium_numeric_csv, capsys):
    base = ["stats", medium_numeric_csv, "--col", "value,other", "--subsize", "250",
            "--niter", "6", "--seed", "3", "--json"]
    _, serial, _ = run_cli(base + ["--workers", "1"], capsys=capsys)
    _, threaded, _ = run_cli(base + ["--workers", "4"], capsys=capsys)
    assert serial == threaded


def test_stats_human_table(medium_numeric_csv, capsys):
    code, out, _ = run_cli(["stats", medium_numeric_csv, "--col", "value",
                            "--subsize", "200", "--niter", "2", "--seed", "1",
                            "--glossary"], capsys=capsys)
    assert code == 0
    assert out.splitlines()[0].split() == ["Mu", "SE", "Std", "Min", "Med", "Max",
                                           "Skew", "Kurt", "mp"]
    assert "value" in out
    assert "* Mu:" in out


def test_shuffle_command(tmp_path, const_csv, capsys):
    out_path = tmp_path / "out.csv"
    code, out, _ = run_cli(["shuffle", const_csv, str(out_path), "--mem", "4096",
                            "--seed", "5"], capsys=capsys)
    assert code == 0
    assert "rows: 1000" in out
    with open(const_csv, "rb") as f1, open(out_path, "rb") as f2:
        assert sorted(f1.read().split(b"\n")) == sorted(f2.read().split(b"\n"))


def test_table_command(medium_numeric_csv, capsys):
    code, out, _ = run_cli(["table", medium_numeric_csv, "--col", "noisy", "--tv",
                            "--subsize", "100", "--niter", "2", "--seed", "0"],
                           capsys=capsys)
    assert code == 0
    assert "200 counts." in out
    assert "No. of levels detected for * noisy *" in out


def test_ols_command_json(tmp_path, capsys):
    rng = np.random.default_rng(0)
    n = 2000
    x1 = rng.normal(0, 1, n)
    x2 = rng.normal(0, 1, n)
    y = 2 * x1 - 3 * x2 + 1 + rng.normal(0, 0.1, n)
    rows = [[f"{a:.6f}", f"{b:.6f}", f"{c:.6f}"] for a, b, c in zip(y, x1, x2)]
    p = write_csv(tmp_path / "reg.csv", ["y", "x1", "x2"], rows)
    code, out, _ = run_cli(["ols", p, "--y", "y", "--x", "x1,x2", "--subsize", "500",
                            "--niter", "4", "--seed", "2", "--json", "--codebook",
                            _codebook(tmp_path, ["y", "x1", "x2"])], capsys=capsys)
    assert code == 0
    payload = json.loads(out)
    assert payload["coefficients"]["x1"]["estimate"] == pytest.approx(2.0, abs=0.05)
    assert payload["metric"]["r_squared"] > 0.99


def test_ols_without_codebook_deterministic(tmp_path, capsys):
    """The documented one-shot form: ols on a bare file, repeated runs
    byte-identical."""
    rng = np.random.default_rng(5)
    n = 3000
    x1 = rng.normal(0, 1, n)
    x2 = rng.normal(0, 1, n)
    y = x1 - 2 * x2 + rng.normal(0, 0.2, n)
    rows = [[f"{a:.5f}", f"{b:.5f}", f"{c:.5f}"] for a, b, c in zip(y, x1, x2)]
    p = write_csv(tmp_path / "synth.csv", ["y", "x1", "x2"], rows)
    argv = ["ols", p, "--y", "y", "--x", "x1,x2", "--niter", "10", "--seed", "7",
            "--subsize", "500"]
    code1, out1, _ = run_cli(argv, capsys=capsys)
    code2, out2, _ = run_cli(argv, capsys=capsys)
    assert code1 == code2 == 0
    assert out1 == out2
    assert "R.Squared" in out1


def test_logit_with_transform_steps_no_codebook(tmp_path, capsys):
    rng = np.random.default_rng(6)
    n = 4000
    x = rng.normal(0, 1, n)
    hour = rng.integers(0, 2400, n)
    yv = (rng.random(n) < 1 / (1 + np.exp(-x))).astype(int)
    rows = [[a, f"{b:.5f}", h] for a, b, h in zip(yv, x, hour)]
    p = write_csv(tmp_path / "lg.csv", ["y", "x", "hour"], rows)
    code, out, err = run_cli(
        ["logit", p, "--y", "y", "--x", "x,hour_am", "--subsize", "800",
         "--niter", "4", "--seed", "3",
         "--bin", "hour 1200 am,pm", "--ady", "hour am"], capsys=capsys)
    assert code == 0, err
    assert "out-of-sample AUC" in out
    assert "hour_am" in out


def _codebook(tmp_path, qlist):
    path = tmp_path / "cb.json"
    path.write_text(json.dumps({"qlist": qlist}))
    return str(path)


def test_hist_svg_written(medium_numeric_csv, tmp_path, capsys):
    outdir = tmp_path / "plots"
    code, out, _ = run_cli(["hist", medium_numeric_csv, "--col", "value",
                            "--subsize", "100", "--niter", "2", "--seed", "0",
                            "--out", str(outdir)], capsys=capsys)
    assert code == 0
    path = out.strip()
    assert path.endswith("t1_2.svg")
    with open(path) as f:
        assert f.read().startswith("<svg ")


def test_repl_transcript_golden(medium_numeric_csv, capsys):
    script = """qlist value,other
app value log(x)
stats value
table noisy tv
badcommand
quit
"""
    code, out, err = run_cli(["repl", medium_numeric_csv, "--subsize", "200",
                              "--niter", "2", "--seed", "21"],
                             stdin_text=script, capsys=capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0].startswith("opened ")
    assert "pond> qlist value,other" in lines
    assert "error: unknown command 'badcommand' (try 'help')" in lines
    # task emissions print in order and end with a terminal line
    assert any(l.startswith("[t1] stats started") for l in lines)
    assert any("stopped_by_k after k=2" in l for l in lines)
    # repeated runs produce the same transcript
    code2, out2, _ = run_cli(["repl", medium_numeric_csv, "--subsize", "200",
                              "--niter", "2", "--seed", "21"],
                             stdin_text=script, capsys=capsys)
    assert out2 == out


def test_repl_usage_error_keeps_state(medium_numeric_csv, capsys):
    script = """qlist value
stats nosuchcolumn
stats value
quit
"""
    code, out, _ = run_cli(["repl", medium_numeric_csv, "--subsize", "100",
                            "--niter", "2", "--seed", "5"],
                           stdin_text=script, capsys=capsys)
    assert code == 0
    assert "error: unknown column: 'nosuchcolumn'" in out
    assert "stopped_by_k" in out  # later command still works
