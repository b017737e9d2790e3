"""Subsample-aggregated regression: per-replicate OLS / logistic fits,
coefficient averaging across replicates, normal-approximation inference
and out-of-sample AUC.

Each replicate standardizes the x columns internally for conditioning,
then back-transforms, so reported coefficients are on the original
column scale.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .pump import Frame
from .source import INTERCEPT, DatasetError

NAN = float("nan")

# JSON-safe stand-in for an infinite t statistic (zero spread across replicates)
TSTAT_SENTINEL = 1e16

IRLS_MAX_ITER = 25
IRLS_TOL = 1e-8
IRLS_RIDGE = 1e-8


class FitError(Exception):
    """A replicate fit could not be computed (the replicate is discarded)."""


@dataclass(frozen=True)
class ReplicateFit:
    """One replicate's coefficients (original scale) and goodness metric."""

    coefficients: dict
    metric_name: str       # "r_squared" or "auc"
    metric: float
    rows_used: int
    notes: tuple = ()


def normal_cdf(z: float) -> float:
    return 0.5 * (1.0 + math.erf(z / math.sqrt(2.0)))


def p_value_display(t: float) -> float:
    """100 x two-sided normal p-value for a t statistic."""
    if t != t:
        return NAN
    return 100.0 * 2.0 * (1.0 - normal_cdf(abs(t)))


@dataclass(frozen=True)
class CoefficientRow:
    estimate: float
    standerr: float  # display units (x100)
    tstat: float
    pvalue: float    # display units (x100)

    def to_json(self) -> dict:
        t = self.tstat
        if t in (math.inf, -math.inf):
            t = math.copysign(TSTAT_SENTINEL, t)
        return {"estimate": _num(self.estimate), "standerr": _num(self.standerr),
                "tstat": _num(t), "pvalue": _num(self.pvalue)}


def _num(v):
    return None if v != v else v


@dataclass(frozen=True)
class RegressionTable:
    rows: dict                # name -> CoefficientRow, display order
    metric_name: str
    metric: float
    k_completed: int
    discarded: int = 0

    def to_json(self, elapsed_s=None) -> dict:
        out = {
            "coefficients": {name: row.to_json() for name, row in self.rows.items()},
            "metric": {self.metric_name: _num(self.metric)},
            "k": self.k_completed,
            "discarded": self.discarded,
        }
        if elapsed_s is not None:
            out["elapsed_s"] = elapsed_s
        return out


def _design(frame: Frame, y: str, xs) -> tuple:
    """Complete-case response vector and raw design columns."""
    yv = np.asarray(frame.numeric(y), dtype=np.float64)
    xs = [c for c in xs if c != INTERCEPT]
    cols = [np.asarray(frame.numeric(c), dtype=np.float64) for c in xs]
    mask = np.isfinite(yv)
    for c in cols:
        mask &= np.isfinite(c)
    rows = int(mask.sum())
    if rows < len(xs) + 2:
        raise FitError(f"only {rows} complete cases for {len(xs)} predictors")
    return yv[mask], [c[mask] for c in cols], xs, rows


def _standardize(cols, names):
    ms, ss, zs = [], [], []
    for c, name in zip(cols, names):
        m = float(c.mean())
        s = float(c.std())
        if s == 0.0:
            raise FitError(f"zero-variance x column: {name!r}")
        ms.append(m)
        ss.append(s)
        zs.append((c - m) / s)
    return ms, ss, zs


def _back_transform(b, ms, ss):
    """Coefficients for standardized x -> original-scale (intercept first)."""
    raw = [b[j + 1] / ss[j] for j in range(len(ss))]
    intercept = b[0] - sum(b[j + 1] * ms[j] / ss[j] for j in range(len(ss)))
    return intercept, raw


def fit_ols_replicate(frame: Frame, y: str, xs) -> ReplicateFit:
    """Least squares on standardized x via orthogonal decomposition,
    reported on the original scale, with the replicate's R^2."""
    yv, cols, names, rows = _design(frame, y, xs)
    ms, ss, zs = _standardize(cols, names)
    Z = np.column_stack([np.ones(rows)] + zs)
    p = Z.shape[1]
    b, _, rank, _ = np.linalg.lstsq(Z, yv, rcond=None)
    dropped = []
    if rank < p:
        keep = _independent_columns(Z)
        dropped = [names[j - 1] for j in range(1, p) if j not in keep]
        warnings.warn(f"rank-deficient design; dependent columns: {dropped}", stacklevel=2)
        bk, _, _, _ = np.linalg.lstsq(Z[:, keep], yv, rcond=None)
        b = np.zeros(p)
        b[keep] = bk
    fitted = Z @ b
    resid = yv - fitted
    sst = float(((yv - yv.mean()) ** 2).sum())
    r2 = 1.0 - float(resid @ resid) / sst if sst > 0 else NAN
    intercept, raw = _back_transform(b, ms, ss)
    coef = {name: (NAN if name in dropped else est) for name, est in zip(names, raw)}
    coef[INTERCEPT] = intercept
    return ReplicateFit(coefficients=coef, metric_name="r_squared", metric=r2,
                        rows_used=rows, notes=tuple(f"dropped:{d}" for d in dropped))


def _independent_columns(Z: np.ndarray):
    keep = [0]
    for j in range(1, Z.shape[1]):
        trial = keep + [j]
        if np.linalg.matrix_rank(Z[:, trial]) == len(trial):
            keep.append(j)
    return keep


def _sigmoid(eta: np.ndarray) -> np.ndarray:
    out = np.empty_like(eta)
    pos = eta >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-eta[pos]))
    ez = np.exp(eta[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def fit_logit_replicate(frame: Frame, y: str, xs, holdout: Frame | None = None) -> ReplicateFit:
    """Logistic regression by iteratively reweighted least squares on
    standardized x (ridge-stabilized normal equations), back-transformed;
    AUC evaluated on the held-out frame."""
    yv, cols, names, rows = _design(frame, y, xs)
    classes = np.unique(yv)
    if not np.all(np.isin(classes, (0.0, 1.0))):
        raise FitError(f"response {y!r} must be 0/1 after transforms")
    if len(classes) < 2:
        raise FitError(f"response {y!r} has a single class in this replicate")
    ms, ss, zs = _standardize(cols, names)
    Z = np.column_stack([np.ones(rows)] + zs)
    p = Z.shape[1]
    beta = np.zeros(p)
    converged = False
    for _ in range(IRLS_MAX_ITER):
        eta = Z @ beta
        mu = _sigmoid(eta)
        w = np.maximum(mu * (1.0 - mu), 1e-10)
        z = eta + (yv - mu) / w
        A = Z.T @ (Z * w[:, None]) + IRLS_RIDGE * np.eye(p)
        b = Z.T @ (w * z)
        new = np.linalg.solve(A, b)
        delta = float(np.max(np.abs(new - beta)))
        beta = new
        if delta < IRLS_TOL:
            converged = True
            break
    if not converged or not np.all(np.isfinite(beta)):
        raise FitError("IRLS did not converge (possible separation)")
    intercept, raw = _back_transform(beta, ms, ss)
    coef = dict(zip(names, raw))
    coef[INTERCEPT] = intercept

    metric = NAN
    if holdout is not None:
        try:
            hy, hcols, _, _ = _design(holdout, y, names)
            scores = np.full(len(hy), intercept)
            for c, name in zip(hcols, names):
                scores = scores + coef[name] * c
            metric = auc(scores, hy)
        except (FitError, DatasetError) as exc:
            warnings.warn(f"holdout AUC unavailable: {exc}", stacklevel=2)
    return ReplicateFit(coefficients=coef, metric_name="auc", metric=metric, rows_used=rows)


def auc(scores, labels) -> float:
    """P(random positive outscores random negative), ties at 1/2
    (rank-sum form)."""
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels, dtype=np.float64)
    pos = y == 1.0
    npos = int(pos.sum())
    nneg = len(y) - npos
    if npos == 0 or nneg == 0:
        raise FitError("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i:j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    rank_sum = float(ranks[pos].sum())
    return (rank_sum - npos * (npos + 1) / 2.0) / (npos * nneg)


def aggregate_fits(fits) -> RegressionTable:
    """Average >= 2 replicate fits into the display table.

    Estimate = mean_k, StandErr = 100*sd_k/sqrt(K) (sd with ddof 1 over
    the replicates where the coefficient was estimable), tStat =
    Estimate/(StandErr/100), pValue = 100*2*(1-Phi(|tStat|)).
    """
    fits = [f for f in fits if isinstance(f, ReplicateFit)]
    if len(fits) < 2:
        raise ValueError("aggregate_fits needs at least 2 replicate fits")
    names: list = []
    for f in fits:
        for name in f.coefficients:
            if name not in names:
                names.append(name)
    names.sort(key=lambda n: (n == INTERCEPT, n))  # alphabetical, intercept last
    rows = {}
    for name in names:
        ests = np.array([f.coefficients.get(name, NAN) for f in fits])
        ests = ests[np.isfinite(ests)]
        if len(ests) < 2:
            rows[name] = CoefficientRow(float(ests[0]) if len(ests) else NAN, NAN, NAN, NAN)
            continue
        estimate = float(ests.mean())
        sd = float(ests.std(ddof=1))
        standerr = 100.0 * sd / math.sqrt(len(ests))
        if standerr == 0.0:
            tstat = 0.0 if estimate == 0.0 else math.copysign(math.inf, estimate)
        else:
            tstat = estimate / (standerr / 100.0)
        rows[name] = CoefficientRow(estimate, standerr, tstat,
                                    0.0 if tstat in (math.inf, -math.inf)
                                    else p_value_display(tstat))
    metrics = np.array([f.metric for f in fits], dtype=np.float64)
    metrics = metrics[np.isfinite(metrics)]
    metric = float(metrics.mean()) if len(metrics) else NAN
    return RegressionTable(rows=rows, metric_name=fits[0].metric_name, metric=metric,
                           k_completed=len(fits))
