"""Acceptance suite: one test per primary criterion, each printing a
PASS/FAIL line (run with -s or check captured output).

Synthetic fixtures are generated once per session; every tolerance is
pinned here, nothing is calibrated after the fact.
"""

import json
import math
import os
import time
from contextlib import contextmanager

import numpy as np
import pytest

from pondstat import open_dataset, shuffle_file
from pondstat.cli import main as cli_main
from pondstat.model import (aggregate_fits, auc, fit_logit_replicate,
                            fit_ols_replicate, p_value_display)
from pondstat.pump import SamplingPlan, draw_sequential, replicate_seed
from pondstat.session import Session, TaskSpec
from pondstat.stats import run_stats, variance_forecast
from pondstat.transform import eval_expr, parse_expr

from conftest import write_csv, write_csv_fast
import oracles


@contextmanager
def criterion(name):
    try:
        yield
    except BaseException:
        print(f"[ACCEPTANCE] {name}: FAIL")
        raise
    print(f"[ACCEPTANCE] {name}: PASS")


def _task_emissions(session, spec, workers=1):
    task = session.start(spec, workers=workers)
    return [e for e in task.stream() if not e.get("terminal")], task


# ------------------------------------------------------------------ fixtures

@pytest.fixture(scope="session")
def lognormal_file(tmp_path_factory):
    """1e6 iid lognormal rows scaled to sd ~= 565 (order already random)."""
    rng = np.random.default_rng(20250811)
    raw = np.exp(rng.normal(6.2, 0.8, 10**6))
    vals = raw * (565.0 / raw.std())
    path = tmp_path_factory.mktemp("accept") / "lognormal.csv"
    write_csv_fast(path, ["value"], [vals], fmt="%.4f")
    return str(path), vals


@pytest.fixture(scope="session")
def population_file(tmp_path_factory):
    """1e5-row population, normal(10, 2), for the variance forecast check."""
    rng = np.random.default_rng(7)
    vals = rng.normal(10.0, 2.0, 10**5)
    path = tmp_path_factory.mktemp("accept") / "pop.csv"
    write_csv_fast(path, ["v"], [vals], fmt="%.6f")
    file_vals = np.round(vals, 6)
    return str(path), file_vals


@pytest.fixture(scope="session")
def centered_file(tmp_path_factory):
    """1e5-row population, standard normal, for the bias decay check."""
    rng = np.random.default_rng(13)
    vals = rng.normal(0.0, 1.0, 10**5)
    path = tmp_path_factory.mktemp("accept") / "centered.csv"
    write_csv_fast(path, ["v"], [vals], fmt="%.6f")
    return str(path), np.round(vals, 6)


@pytest.fixture(scope="session")
def ols_file(tmp_path_factory):
    """2e6 rows of y = 2 x1 - 3 x2 + 0 x3 + 1 + N(0, 0.1^2)."""
    rng = np.random.default_rng(99)
    n = 2 * 10**6
    x1, x2, x3 = (rng.normal(0, 1, n) for _ in range(3))
    y = 2 * x1 - 3 * x2 + 1 + rng.normal(0, 0.1, n)
    path = tmp_path_factory.mktemp("accept") / "ols.csv"
    write_csv_fast(path, ["y", "x1", "x2", "x3"], [y, x1, x2, x3], fmt="%.5f")
    return str(path)


@pytest.fixture(scope="session")
def logit_file(tmp_path_factory):
    """4e5 rows of logistic data with beta = (1, -1, 0.5), zero intercept."""
    rng = np.random.default_rng(55)
    n = 4 * 10**5
    x1, x2, x3 = (rng.normal(0, 1, n) for _ in range(3))
    eta = 1.0 * x1 - 1.0 * x2 + 0.5 * x3
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    path = tmp_path_factory.mktemp("accept") / "logit.csv"
    write_csv_fast(path, ["y", "x1", "x2", "x3"], [y, x1, x2, x3],
                   fmt=["%.0f", "%.5f", "%.5f", "%.5f"])
    return str(path)


def _open_q(path, cols):
    return open_dataset(path, "with_codebook", {"qlist": list(cols)})


# ------------------------------------------------------------------ criteria

def test_se_formula_reproduction(lognormal_file):
    """Sequential n=1e5, K=5: SE reproduces 100*Std_avg/sqrt(nK) exactly
    and Mu lands within 4 SE of the full-pass mean, in under 30 s."""
    path, vals = lognormal_file
    h = _open_q(path, ["value"])
    full_mean = float(np.round(vals, 4).mean())
    with criterion("SE formula reproduction (n=1e5, K=5)"):
        t0 = time.monotonic()
        s = Session(h, n=10**5, k_max=5, sequential=True, master_seed=42)
        emissions, task = _task_emissions(s, TaskSpec("stats", s.plan(),
                                                      columns=("value",)))
        elapsed = time.monotonic() - t0
        final = emissions[-1]["value"]
        k, n = emissions[-1]["k"], emissions[-1]["n"]
        assert k == 5 and n == 10**5
        assert final["se"] == 100.0 * final["std"] / math.sqrt(n * k)  # exact identity
        for e in emissions:  # identity holds at every emission k
            assert e["value"]["se"] == 100.0 * e["value"]["std"] / math.sqrt(n * e["k"])
        assert final["std"] == pytest.approx(565.0, rel=0.02)
        assert abs(final["mu"] - full_mean) < 4.0 * final["se"] / 100.0
        assert elapsed < 30.0, f"took {elapsed:.1f}s"


def test_variance_forecast_calibration(population_file):
    """Empirical var of the averaged mean over 500 seeded runs is within
    25% of g'(mu)^2 sigma^2 (1/N + 1/nK), in under 60 s."""
    path, vals = population_file
    h = _open_q(path, ["v"])
    N, n, K = 10**5, 10**3, 10
    forecast = variance_forecast("x", float(vals.mean()), float(vals.var()), N, n, K)
    with criterion("variance forecast calibration (500 runs)"):
        t0 = time.monotonic()
        mus = []
        for seed in range(500):
            plan = SamplingPlan(n=n, k_max=K, sequential=True, master_seed=seed)
            for _, agg in run_stats(h, plan, columns=["v"]):
                pass
            mus.append(agg.row("v").mu)
        elapsed = time.monotonic() - t0
        empirical = float(np.var(mus, ddof=1))
        assert 0.75 * forecast < empirical < 1.25 * forecast, \
            f"empirical {empirical:.3g} vs forecast {forecast:.3g}"
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_bias_decay_quadratic(centered_file):
    """For g(x)=x^2 the averaged-estimator bias shrinks ~10x from n=100
    to n=1000 (factor within [5, 20] over 2000 runs), in under 60 s."""
    path, vals = centered_file
    h = _open_q(path, ["v"])
    theta = float(vals.mean()) ** 2
    with criterion("second-order bias decay (g = x^2)"):
        t0 = time.monotonic()
        bias = {}
        for n in (100, 1000):
            thetas = []
            for seed in range(2000):
                frame = draw_sequential(h, n, seed=replicate_seed(seed, n))
                thetas.append(float(frame.quant["v"].mean()) ** 2)
            bias[n] = abs(float(np.mean(thetas)) - theta)
        elapsed = time.monotonic() - t0
        ratio = bias[100] / bias[1000]
        assert 5.0 <= ratio <= 20.0, f"bias ratio {ratio:.2f}"
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_full_coverage_oracle(tmp_path):
    """Sequential n=N, K=1 on a 1e4-row fixture equals a brute-force full
    pass for stats, frequencies, correlation, histogram and box summary."""
    rng = np.random.default_rng(3)
    N = 10**4
    a = rng.normal(5, 3, N)
    a_cells = np.char.mod("%.4f", a).astype(object)
    a_cells[rng.random(N) < 0.03] = "NA"
    b = np.round(np.exp(rng.normal(1, 0.5, N)), 4)
    g = rng.choice(["red", "green", "blue", "teal", "mauve"], N, p=[.4, .3, .15, .1, .05])
    rows = [[a_cells[i], f"{b[i]:.4f}", g[i]] for i in range(N)]
    path = write_csv(tmp_path / "full.csv", ["a", "b", "g"], rows)
    h = _open_q(path, ["a", "b"])
    a_vals = [None if c == "NA" else float(c) for c in a_cells]
    b_vals = [float(f"{v:.4f}") for v in b]

    with criterion("full-coverage oracle (n=N, K=1)"):
        s = Session(h, n=N, k_max=1, sequential=True, master_seed=17)
        emissions, _ = _task_emissions(s, TaskSpec("stats", s.plan(),
                                                   columns=("a", "b", "_INTERCEPT_")))
        table = emissions[-1]
        for col, ref_vals in (("a", a_vals), ("b", b_vals)):
            oracle = oracles.brute_stats(ref_vals)
            for f in ("mu", "se", "std", "min", "med", "max", "skew", "kurt", "mp"):
                assert table[col][f] == pytest.approx(oracle[f], rel=1e-9), (col, f)
        assert table["_INTERCEPT_"]["mu"] == 1.0 and table["_INTERCEPT_"]["std"] == 0.0

        # frequency table: exact pooled counts
        emissions, _ = _task_emissions(s, TaskSpec("table", s.plan(), variable="g",
                                                   table_view=True))
        freq = {r["level"]: r["count"] for r in emissions[-1]["levels"]}
        import collections

        assert freq == dict(collections.Counter(g.tolist()))

        # correlation: pairwise-complete Pearson
        emissions, _ = _task_emissions(s, TaskSpec("corr", s.plan(), columns=("a", "b")))
        r_engine = emissions[-1]["matrix"][0][1]
        assert r_engine == pytest.approx(oracles.pearson(a_vals, b_vals), rel=1e-9)

        # histogram: exact bin counts against an independent binning oracle
        emissions, _ = _task_emissions(s, TaskSpec("plot", s.plan(),
                                                   plot={"kind": "hist", "column": "b"}))
        spec = emissions[-1]["plot"]
        assert spec["data"]["counts"] == oracles.bin_counts(b_vals, spec["data"]["bin_edges"])

        # box summary: linear-interpolation quantiles and 1.5 IQR whiskers
        emissions, _ = _task_emissions(s, TaskSpec("plot", s.plan(),
                                                   plot={"kind": "box", "y": "b"}))
        box = emissions[-1]["plot"]["data"]["groups"][0]
        for q, key in ((0.25, "q1"), (0.5, "med"), (0.75, "q3")):
            assert box[key] == pytest.approx(oracles.quantile_linear(b_vals, q), rel=1e-9)
        iqr = box["q3"] - box["q1"]
        inside = [v for v in b_vals if box["q1"] - 1.5 * iqr <= v <= box["q3"] + 1.5 * iqr]
        assert box["whisker_low"] == min(inside)
        assert box["whisker_high"] == max(inside)
        assert sorted(box["outliers"]) == sorted(v for v in b_vals
                                                 if v < box["whisker_low"]
                                                 or v > box["whisker_high"])


def test_shuffle_acceptance(tmp_path):
    """Multiset/header preservation on 1e5 rows, chi-square positional
    uniformity over 2000 seeds, and the instrumented memory bound."""
    from scipy import stats as sps

    with criterion("shuffle: multiset + header + memory bound (1e5 rows)"):
        big = tmp_path / "big.csv"
        with open(big, "w") as f:
            f.write("id,val\n")
            for i in range(10**5):
                f.write(f"{i},{(i * 17) % 1000}\n")
        out = tmp_path / "big.out.csv"
        budget = 1 << 16
        report = shuffle_file(big, out, memory_budget=budget, seed=12)
        assert report.bytes_peak_memory <= budget
        with open(big, "rb") as f1, open(out, "rb") as f2:
            src = f1.read().split(b"\n")
            dst = f2.read().split(b"\n")
        assert dst[0] == src[0]
        assert sorted(dst[1:]) == sorted(src[1:])

    with criterion("shuffle: positional uniformity chi-square (2000 seeds)"):
        small = tmp_path / "small.csv"
        n = 100
        write_csv(small, ["k"], [[i] for i in range(n)])
        counts = np.zeros(n)
        out = tmp_path / "small.out.csv"
        for seed in range(2000):
            shuffle_file(small, out, memory_budget=1 << 14, seed=seed)
            with open(out, "rb") as f:
                pos = f.read().split(b"\n")[1:-1].index(b"0")
            counts[pos] += 1
        expected = 2000 / n
        chi2 = float(((counts - expected) ** 2 / expected).sum())
        p = float(sps.chi2.sf(chi2, n - 1))
        assert p > 0.001, f"chi2 {chi2:.1f}, p {p:.5f}"


def test_ols_recovery_and_null_calibration(ols_file):
    """n=1e4, K=20 recovers (2, -3, 1) within 0.05; the null coefficient's
    pValue dips below 5 in 5% +- 3% of 200 seeded runs."""
    h = _open_q(ols_file, ["y", "x1", "x2", "x3"])
    with criterion("OLS recovery (n=1e4, K=20)"):
        s = Session(h, n=10**4, k_max=20, sequential=True, master_seed=0)
        emissions, _ = _task_emissions(s, TaskSpec("ols", s.plan(), y="y",
                                                   xs=("x1", "x2", "x3")))
        coef = emissions[-1]["coefficients"]
        assert coef["x1"]["estimate"] == pytest.approx(2.0, abs=0.05)
        assert coef["x2"]["estimate"] == pytest.approx(-3.0, abs=0.05)
        assert coef["x3"]["estimate"] == pytest.approx(0.0, abs=0.05)
        assert coef["_INTERCEPT_"]["estimate"] == pytest.approx(1.0, abs=0.05)
        assert emissions[-1]["metric"]["r_squared"] > 0.99

    with criterion("OLS null-coefficient pValue calibration (200 runs)"):
        hits = 0
        for seed in range(200):
            fits = []
            for k in range(1, 21):
                frame = draw_sequential(h, 10**4, seed=replicate_seed(seed, k))
                fits.append(fit_ols_replicate(frame, "y", ["x1", "x2", "x3"]))
            table = aggregate_fits(fits)
            if table.rows["x3"].pvalue < 5.0:
                hits += 1
        rate = hits / 200.0
        assert 0.02 <= rate <= 0.08, f"null rejection rate {rate:.3f}"


def test_logit_and_auc(logit_file, tmp_path):
    """Logit recovery within 0.1, AUC == all-pairs oracle to 1e-12, and a
    replicate IRLS fit matching full Newton to 1e-6."""
    h = _open_q(logit_file, ["y", "x1", "x2", "x3"])
    with criterion("logit recovery (nK = 2e5)"):
        s = Session(h, n=10**4, k_max=20, sequential=True, master_seed=0)
        emissions, _ = _task_emissions(s, TaskSpec("logit", s.plan(), y="y",
                                                   xs=("x1", "x2", "x3")))
        coef = emissions[-1]["coefficients"]
        assert coef["x1"]["estimate"] == pytest.approx(1.0, abs=0.1)
        assert coef["x2"]["estimate"] == pytest.approx(-1.0, abs=0.1)
        assert coef["x3"]["estimate"] == pytest.approx(0.5, abs=0.1)
        assert coef["_INTERCEPT_"]["estimate"] == pytest.approx(0.0, abs=0.1)
        assert 0.5 < emissions[-1]["metric"]["auc"] < 1.0

    with criterion("AUC equals the all-pairs oracle (1000 points)"):
        rng = np.random.default_rng(2)
        scores = np.round(rng.normal(0, 1, 1000), 2)
        labels = (rng.random(1000) < 0.35).astype(int)
        assert auc(scores, labels) == pytest.approx(
            oracles.auc_all_pairs(scores.tolist(), labels.tolist()), abs=1e-12)

    with criterion("replicate logit matches reference Newton (500 rows)"):
        rng = np.random.default_rng(4)
        x1 = rng.normal(0, 1, 500)
        x2 = rng.normal(0, 1, 500)
        eta = 0.3 + x1 - 1.5 * x2
        y = (rng.random(500) < 1 / (1 + np.exp(-eta))).astype(float)
        from pondstat.pump import Frame

        frame = Frame(k=1, n_rows=500,
                      quant={"y": y, "x1": x1, "x2": x2}, order=["y", "x1", "x2"])
        fit = fit_logit_replicate(frame, "y", ["x1", "x2"])
        ref = oracles.newton_logit(np.column_stack([np.ones(500), x1, x2]).tolist(),
                                   y.tolist())
        assert fit.coefficients["_INTERCEPT_"] == pytest.approx(ref[0], abs=1e-6)
        assert fit.coefficients["x1"] == pytest.approx(ref[1], abs=1e-6)
        assert fit.coefficients["x2"] == pytest.approx(ref[2], abs=1e-6)


def test_inference_arithmetic_identity(ols_file):
    """tStat * StandErr / 100 reproduces Estimate on every row."""
    h = _open_q(ols_file, ["y", "x1", "x2", "x3"])
    with criterion("inference arithmetic: tStat x StandErr/100 = Estimate"):
        fits = []
        for k in range(1, 11):
            frame = draw_sequential(h, 2000, seed=replicate_seed(5, k))
            fits.append(fit_ols_replicate(frame, "y", ["x1", "x2", "x3"]))
        table = aggregate_fits(fits)
        for name, row in table.rows.items():
            assert row.tstat * (row.standerr / 100.0) == pytest.approx(
                row.estimate, rel=1e-12), name


def test_pvalue_at_0945_true_arithmetic():
    """The erf-based CDF is accurate (tabulated Phi(1.96)); a pValue of
    34.442 corresponds to an unrounded tStat of ~0.94547."""
    with criterion("pValue arithmetic (erf-based normal CDF)"):
        from pondstat.model import normal_cdf

        assert normal_cdf(1.96) == pytest.approx(0.9750, abs=2.2e-5)
        assert p_value_display(0.94547) == pytest.approx(34.442, abs=2e-3)
        assert p_value_display(0.945) == pytest.approx(34.4659, abs=1e-3)


@pytest.mark.xfail(strict=True,
                   reason="stated target is arithmetically unreachable: 2*(1-Phi(0.945)) "
                          "= 0.34466, while 34.44 corresponds to the pre-rounding "
                          "tStat ~0.94547; no accurate CDF lands within 0.01 at z=0.945")
def test_pvalue_at_0945_spec_bound_literal():
    print("[ACCEPTANCE] pValue(|z|=0.945) = 34.44 +- 0.01: FAIL (stated target "
          "unreachable; the true value at z=0.945 is 34.466)")
    assert p_value_display(0.945) == pytest.approx(34.44, abs=0.01)


def _golden_dsl_cases():
    e = math.e
    cases = [
        # departure-hour and signed-log pipelines
        ("sign(x)*log1p(abs(x))", 0.0), ("sign(x)*log1p(abs(x))", -(e - 1)),
        ("sign(x)*log1p(abs(x))", 12.5), ("sign(x)*log1p(abs(x))", -3.75),
        ("floor(x/100)", 2359.0), ("max(x,5)", 3.0), ("min(x,22)", 23.0),
        ("min(max(floor(x/100),5),22)", 2359.0),
        ("min(max(floor(x/100),5),22)", 130.0),
        ("min(max(floor(x/100),5),22)", 450.0),
        ("if(x>0,1,0)", -2.0), ("if(x>0,1,0)", 2.0), ("if(x>0,1,0)", 0.0),
        ("log(x)", 100.0), ("log(x)", 0.0), ("log(x)", -1.0),
        # arithmetic / precedence
        ("2+3*4", 1.0), ("-3^2", 1.0), ("2^-1", 1.0), ("2^3^2", 1.0),
        ("(2+3)*4", 1.0), ("7/2", 1.0), ("x/0", 3.0), ("0/0", 1.0),
        ("x^0.5", 2.0), ("x^0.5", -2.0), ("x^x", -0.5), ("0^0", 1.0),
        # comparisons produce 1/0
        ("1<2", 0.0), ("2<=2", 0.0), ("3>4", 0.0), ("4>=4", 0.0),
        ("x==1", 1.0), ("x!=1", 1.0), ("(x<5)+(x>=5)*2", 7.0),
        # functions
        ("exp(x)", 1.0), ("exp(x)", 1000.0), ("sqrt(x)", 16.0), ("sqrt(x)", -4.0),
        ("abs(x)", -7.5), ("sign(x)", -0.0), ("floor(x)", -2.5), ("ceil(x)", -2.5),
        ("log1p(x)", -1.0), ("log1p(x)", e - 1), ("min(x,-x)", 3.0),
        ("max(x,-x)", 3.0), ("if(x==0,-1,1/x)", 0.0),
        # missing propagation
        ("x+1", float("nan")), ("if(x>0,1,0)", float("nan")),
        ("min(x,1)", float("nan")), ("sign(x)*log1p(abs(x))", float("nan")),
    ]
    assert len(cases) >= 50
    return cases


def test_dsl_golden_cases_and_totality():
    """50+ expression/value cases match the independent tree evaluator
    exactly; seeded random expressions never crash (totality)."""
    with criterion("DSL golden cases vs independent evaluator (50 cases)"):
        for text, x in _golden_dsl_cases():
            ast = parse_expr(text)
            engine = eval_expr(ast, x)
            oracle = oracles.eval_tree(ast, x)
            same = (engine != engine and oracle != oracle) or engine == oracle
            assert same, (text, x, engine, oracle)

    with criterion("DSL totality under seeded fuzz"):
        rng = np.random.default_rng(0)
        leaves = ["x", "1", "0", "-2", "0.5", "1e3"]
        funcs = ["log", "log1p", "exp", "abs", "sign", "floor", "ceil", "sqrt"]
        ops = ["+", "-", "*", "/", "^", "<", "<=", ">", ">=", "==", "!="]

        def gen(depth):
            if depth == 0 or rng.random() < 0.3:
                return leaves[rng.integers(len(leaves))]
            form = rng.integers(4)
            if form == 0:
                return f"{funcs[rng.integers(len(funcs))]}({gen(depth - 1)})"
            if form == 1:
                return f"({gen(depth - 1)}){ops[rng.integers(len(ops))]}({gen(depth - 1)})"
            if form == 2:
                return f"min({gen(depth - 1)},{gen(depth - 1)})"
            return f"if({gen(depth - 1)},{gen(depth - 1)},{gen(depth - 1)})"

        xs = [0.0, 1.0, -1.0, 1e300, -1e300, 1e-300, float("nan")]
        for _ in range(300):
            text = gen(4)
            for x in xs:
                v = eval_expr(text, x)
                assert math.isnan(v) or math.isfinite(v), (text, x, v)


def test_cli_determinism_serial_vs_concurrent(medium_numeric_csv, capsys):
    """Same (data, spec, seed) gives byte-identical CLI stdout whether
    replicates run serially or 4-way concurrent."""
    with criterion("determinism: byte-identical CLI output"):
        base = ["stats", medium_numeric_csv, "--col", "value,other,noisy",
                "--subsize", "300", "--niter", "8", "--seed", "123"]
        outputs = []
        for extra in ([], ["--workers", "4"], [], ["--workers", "4"]):
            assert cli_main(base + extra + ["--json"]) == 0
            out, _ = capsys.readouterr()
            outputs.append(out)
        assert len(set(outputs)) == 1
        for extra in ([], ["--workers", "4"]):
            assert cli_main(base + extra) == 0
            out, _ = capsys.readouterr()
            outputs.append(out)
        assert outputs[-1] == outputs[-2]


AIRLINE = os.environ.get("PONDSTAT_AIRLINE", "2008.csv.shuffle")


@pytest.mark.skipif(not os.path.exists(AIRLINE),
                    reason="optional airline file 2008.csv.shuffle not present")
def test_airline_2008_optional():
    h = open_dataset(AIRLINE)
    with criterion("airline 2008 Distance (optional dataset)"):
        s = Session(h, n=10**5, k_max=10, sequential=True, master_seed=1)
        emissions, _ = _task_emissions(s, TaskSpec("stats", s.plan(),
                                                   columns=("Distance",)))
        row = emissions[-1]["Distance"]
        assert abs(row["mu"] - 726.39) < 3.0 * row["se"] / 100.0
        assert row["med"] == pytest.approx(581.0, abs=0.51)
    with criterion("airline 2008 OLS (optional dataset)"):
        s2 = Session(h, n=10**5, k_max=20, sequential=True, master_seed=1)
        emissions, _ = _task_emissions(s2, TaskSpec("ols", s2.plan(), y="ArrDelay",
                                                    xs=("DepDelay", "Distance")))
        coef = emissions[-1]["coefficients"]
        assert 0.95 <= coef["DepDelay"]["estimate"] <= 1.09
        assert 0.80 <= emissions[-1]["metric"]["r_squared"] <= 0.92
