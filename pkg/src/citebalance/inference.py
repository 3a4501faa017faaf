"""Weighted median regression of per-paper MM overcitation on neighborhood composition."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from . import _kernels
from .authors.gender import CATEGORY_NAMES
from .imbalance import (
    STREAM_BOOTSTRAP,
    STREAM_NULL,
    CitationPanel,
    holm_bonferroni,
    null_pvalue,
    percentile_interval,
    replicate_rng,
    clamp_interval,
    _run_replicates,
)

logger = logging.getLogger(__name__)

GROUP_COLUMNS = tuple(CATEGORY_NAMES)
SLOPE_COLUMNS = ("MA_or", "MMP_or")
STREAM_REGRESSION = 10


class RegressionError(ValueError):
    pass


@dataclass
class RegressionSpec:
    tau: float = 0.5
    estimator: str = "quantile"  # or "least_squares"
    slopes: tuple[str, ...] = SLOPE_COLUMNS

    def __post_init__(self):
        if not 0.0 < self.tau < 1.0:
            raise ValueError("tau must lie in (0, 1)")
        if self.estimator not in ("quantile", "least_squares"):
            raise ValueError(f"unknown estimator {self.estimator!r}")


@dataclass
class FitResult:
    columns: list[str]
    coef: np.ndarray
    objective: float
    n: int
    excluded: int = 0
    estimator: str = "quantile"
    ci_low: np.ndarray | None = None
    ci_high: np.ndarray | None = None
    p_raw: np.ndarray | None = None
    p_adjusted: np.ndarray | None = None
    extra: dict = field(default_factory=dict)

    def coefficient(self, name: str) -> float:
        return float(self.coef[self.columns.index(name)])

    @property
    def conditional(self) -> dict[str, float]:
        return {g: self.coefficient(g) for g in GROUP_COLUMNS if g in self.columns}

    def rows(self) -> list[dict]:
        out = []
        for j, name in enumerate(self.columns):
            row = {"term": name, "estimate": float(self.coef[j]), "estimator": self.estimator}
            for key, arr in (("ci_low", self.ci_low), ("ci_high", self.ci_high), ("p_raw", self.p_raw),
                             ("p_holm", self.p_adjusted)):
                row[key] = float(arr[j]) if arr is not None else float("nan")
            out.append(row)
        return out


# -- solvers -----------------------------------------------------------------------

def check_loss(resid, weights, tau: float = 0.5) -> float:
    return _kernels.check_loss(np.asarray(resid, dtype=float), np.asarray(weights, dtype=float), tau)


def _check_rank(X):
    if X.shape[0] == 0:
        raise RegressionError("no candidate papers")
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise RegressionError("design matrix is rank deficient")


def quantile_coefficients(X, y, w=None, tau: float = 0.5, tie_break: bool = True) -> tuple[np.ndarray, float]:
    """Exact check-loss minimizer via linear programming.

    Among optimal solutions the one with the smallest coefficient sum is
    returned, which makes a split weighted median resolve to the lower value.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    _check_rank(X)
    scale = w.mean()
    wn = w / scale
    c = np.concatenate([np.zeros(p), tau * wn, (1 - tau) * wn])
    eye = sparse.identity(n, format="csr")
    A_eq = sparse.hstack([sparse.csr_matrix(X), eye, -eye], format="csr")
    bounds = [(None, None)] * p + [(0, None)] * (2 * n)
    res = linprog(c, A_eq=A_eq, b_eq=y, bounds=bounds, method="highs")
    if res.status != 0:
        raise RegressionError(f"quantile LP failed: {res.message}")
    beta = res.x[:p]
    opt = float(res.fun)
    if tie_break:
        c2 = np.concatenate([np.ones(p), np.zeros(2 * n)])
        slack = 1e-9 * max(1.0, abs(opt))
        res2 = linprog(c2, A_ub=c[None, :], b_ub=[opt + slack], A_eq=A_eq, b_eq=y, bounds=bounds,
                       method="highs")
        if res2.status == 0:
            beta = res2.x[:p]
    beta = _polish_to_vertex(X, y, wn, tau, beta)
    return beta, check_loss(y - X @ beta, w, tau)


def _polish_to_vertex(X, y, w, tau, beta):
    # snap to the basic solution through the p smallest residuals when it is no worse
    n, p = X.shape
    if n < p:
        return beta
    resid = np.abs(y - X @ beta)
    idx = np.argsort(resid, kind="stable")[:p]
    try:
        cand = np.linalg.solve(X[idx], y[idx])
    except np.linalg.LinAlgError:
        return beta
    base = check_loss(y - X @ beta, w, tau)
    new = check_loss(y - X @ cand, w, tau)
    if new <= base + 1e-12 * max(1.0, base) and np.max(np.abs(cand - beta)) < 1e-5 * max(1.0, np.max(np.abs(beta))):
        return cand
    return beta


def least_squares_coefficients(X, y, w=None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    w = np.ones(len(y)) if w is None else np.asarray(w, dtype=float)
    _check_rank(X)
    sw = np.sqrt(w)
    beta, *_ = np.linalg.lstsq(X * sw[:, None], y * sw, rcond=None)
    return beta


def vertex_oracle(X, y, w=None, tau: float = 0.5) -> tuple[np.ndarray, float]:
    """Brute force over all basic solutions (p residuals exactly zero).

    Ties in the objective go to the smallest coefficient sum, mirroring
    ``quantile_coefficients``. Intended for small n and p only.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    n, p = X.shape
    w = np.ones(n) if w is None else np.asarray(w, dtype=float)
    best = None
    for subset in itertools.combinations(range(n), p):
        S = list(subset)
        if abs(np.linalg.det(X[S])) < 1e-12:
            continue
        beta = np.linalg.solve(X[S], y[S])
        r = y - X @ beta
        obj = float(np.sum(w * r * (tau - (r < 0))))
        key = (obj, float(beta.sum()))
        if best is None or obj < best[0][0] - 1e-10 or (abs(obj - best[0][0]) <= 1e-10 and key[1] < best[0][1]):
            best = (key, beta)
    if best is None:
        raise RegressionError("no nonsingular basis")
    return best[1], best[0][0]


# -- design and fits -------------------------------------------------------------

@dataclass
class RegressionData:
    """Per citing paper: outcome δ_p and regressors, all in percentage points."""

    doi: list[str]
    group: np.ndarray  # citing category code 0..3
    delta: np.ndarray
    weight: np.ndarray
    MA_or: np.ndarray
    MMP_or: np.ndarray
    excluded: int = 0

    def take(self, idx) -> "RegressionData":
        return RegressionData([self.doi[i] for i in idx], self.group[idx], self.delta[idx], self.weight[idx],
                              self.MA_or[idx], self.MMP_or[idx], self.excluded)

    def with_delta(self, delta) -> "RegressionData":
        return RegressionData(self.doi, self.group, np.asarray(delta, dtype=float), self.weight,
                              self.MA_or, self.MMP_or, self.excluded)


def regression_data(panel: CitationPanel, neighborhoods: Mapping[str, object], obs=None) -> RegressionData:
    """Join per-paper overcitation with neighborhood stats.

    Papers with unknown citing category or unavailable neighborhood measures
    are dropped and counted in ``excluded``.
    """
    obs = panel.obs if obs is None else obs
    n = obs.sum(axis=1)
    sel, ma, mmp = [], [], []
    for i, doi in enumerate(panel.row_doi):
        st = neighborhoods.get(doi)
        if panel.row_cat[i] < 0 or st is None or not st.available or n[i] <= 0:
            continue
        sel.append(i)
        ma.append(100.0 * st.MA_or)
        mmp.append(100.0 * st.MMP_or)
    sel = np.array(sel, dtype=np.int64)
    excluded = panel.n_rows - len(sel)
    if excluded:
        logger.info("regression excludes %d papers without neighborhood stats or category", excluded)
    delta = 100.0 * (obs[sel, 0] - panel.exp[sel, 0]) / n[sel] if len(sel) else np.zeros(0)
    data = RegressionData([panel.row_doi[i] for i in sel], panel.row_cat[sel], delta, n[sel],
                          np.array(ma), np.array(mmp), excluded)
    data.rows = sel
    return data


def design_matrix(data: RegressionData, slopes: Sequence[str] = SLOPE_COLUMNS) -> tuple[np.ndarray, list[str]]:
    cols, names = [], []
    for code, g in enumerate(GROUP_COLUMNS):
        ind = (data.group == code).astype(float)
        if ind.any():
            cols.append(ind)
            names.append(g)
    for s in slopes:
        cols.append(np.asarray(getattr(data, s), dtype=float))
        names.append(s)
    X = np.column_stack(cols) if cols else np.zeros((len(data.delta), 0))
    return X, names


def _fit(spec: RegressionSpec, data: RegressionData, tie_break: bool = True) -> tuple[np.ndarray, list[str], float]:
    X, names = design_matrix(data, spec.slopes)
    if spec.estimator == "quantile":
        beta, obj = quantile_coefficients(X, data.delta, data.weight, spec.tau, tie_break)
    else:
        beta = least_squares_coefficients(X, data.delta, data.weight)
        obj = float(np.sum(data.weight * (data.delta - X @ beta) ** 2))
    return beta, names, obj


def fit_quantile(spec: RegressionSpec, data: RegressionData, tie_break: bool = True) -> FitResult:
    spec = RegressionSpec(spec.tau, "quantile", spec.slopes)
    beta, names, obj = _fit(spec, data, tie_break)
    return FitResult(names, beta, obj, len(data.delta), data.excluded, "quantile")


def fit_least_squares(spec: RegressionSpec, data: RegressionData, tie_break: bool = True) -> FitResult:
    spec = RegressionSpec(spec.tau, "least_squares", spec.slopes)
    beta, names, obj = _fit(spec, data)
    return FitResult(names, beta, obj, len(data.delta), data.excluded, "least_squares")


def conditional_overcitation(fit: FitResult, group: str) -> dict:
    """Fitted δ_p for a citing group where MA_or = MMP_or = 0."""
    if group not in fit.columns or group not in GROUP_COLUMNS:
        raise KeyError(f"group {group!r} absent from fit")
    j = fit.columns.index(group)
    out = {"group": group, "value": float(fit.coef[j])}
    for key, arr in (("ci_low", fit.ci_low), ("ci_high", fit.ci_high), ("p_raw", fit.p_raw),
                     ("p_holm", fit.p_adjusted)):
        out[key] = float(arr[j]) if arr is not None else float("nan")
    return out


def infer_regression(spec: RegressionSpec, panel: CitationPanel, neighborhoods: Mapping[str, object],
                     B: int = 1000, R: int = 1000, seed: int = 0, workers: int = 1) -> FitResult:
    """Fit plus bootstrap CIs (resampled citing papers) and null p-values (redrawn cited categories).

    Replicates refit the regression. A replicate whose design loses a
    column is left as NaN and ignored in the intervals.
    """
    data = regression_data(panel, neighborhoods)
    fitter = fit_quantile if spec.estimator == "quantile" else fit_least_squares
    fit = fitter(spec, data)
    k = len(fit.columns)

    def refit(d: RegressionData) -> np.ndarray:
        # exact ties are non-generic in replicates, so skip the second LP
        try:
            f = fitter(spec, d, tie_break=False)
        except RegressionError:
            return np.full(k, np.nan)
        if f.columns != fit.columns:
            return np.full(k, np.nan)
        return f.coef

    def boot(i):
        rng = replicate_rng(seed, STREAM_REGRESSION + STREAM_BOOTSTRAP, i)
        idx = rng.integers(0, len(data.delta), len(data.delta))
        return refit(data.take(idx))

    rows = data.rows
    n_obs = panel.obs.sum(axis=1)[rows]

    def null(i):
        rng = replicate_rng(seed, STREAM_REGRESSION + STREAM_NULL, i)
        obs = panel.null_observed(rng)
        delta = 100.0 * (obs[rows, 0] - panel.exp[rows, 0]) / n_obs
        return refit(data.with_delta(delta))

    reps = _run_replicates(boot, B, workers) if B > 0 else np.zeros((0, k))
    nulls = _run_replicates(null, R, workers) if R > 0 else np.zeros((0, k))
    if B > 0:
        lo, hi = percentile_interval(reps)
        fit.ci_low, fit.ci_high = clamp_interval(fit.coef, lo, hi)
    if R > 0:
        fit.p_raw = null_pvalue(fit.coef, nulls)
        fit.p_adjusted = holm_bonferroni(fit.p_raw)
    fit.extra["bootstrap"] = reps
    fit.extra["null"] = nulls
    return fit
