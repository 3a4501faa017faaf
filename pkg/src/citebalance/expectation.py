"""Expected authorship-category probabilities conditional on paper features.

A penalized multinomial logit with cubic B-spline smooths for publication
date, team size and combined lead-author seniority, plus treatment-coded
categorical terms (journal, review status, optionally subfield). The fitted
probabilities serve as expected citation shares: summing them over a set of
cited papers gives the expected number of citations per category.
"""

from __future__ import annotations

import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
from scipy.interpolate import BSpline

from .authors.gender import CATEGORIES, GenderCategory, Label

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SMOOTH_FEATURES = ("months_since_epoch", "team_size", "combined_seniority")
CATEGORICAL_FEATURES = ("journal", "is_review")
MISSING_LEVEL = "<missing>"
N_CAT = 4
GCV_GRID = tuple(10.0 ** k for k in range(-3, 4))

# relative weight of the penalty on each smooth's linear null space
NULL_SPACE_SHRINK = 0.1
LINEAR_TERM_PENALTY = 1e-2


class ModelError(ValueError):
    pass


# -- features ----------------------------------------------------------------

@dataclass(frozen=True)
class PaperFeatures:
    months_since_epoch: int
    team_size: int
    combined_seniority: int
    journal: str
    is_review: bool
    subfield: str | None = None


def months_since_epoch(year: int, month: int, epoch_year: int = 1995) -> int:
    return (year - epoch_year) * 12 + (month - 1)


def build_features(record, authorship, seniorities: Mapping[int, int], epoch_year: int = 1995) -> PaperFeatures:
    ids = authorship.ids[record.doi]
    # a single author fills both lead roles and is counted twice
    combined = seniorities.get(ids[0], 0) + seniorities.get(ids[-1], 0)
    return PaperFeatures(
        months_since_epoch=months_since_epoch(record.pub_year, record.pub_month, epoch_year),
        team_size=len(record.authors),
        combined_seniority=int(combined),
        journal=record.journal,
        is_review=bool(record.is_review),
        subfield=record.subfield,
    )


@dataclass
class FeatureTable:
    """Column-oriented features for many papers."""

    columns: dict[str, np.ndarray]

    def __len__(self) -> int:
        return len(next(iter(self.columns.values())))

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def take(self, idx) -> "FeatureTable":
        return FeatureTable({k: v[idx] for k, v in self.columns.items()})

    @classmethod
    def from_features(cls, feats: Sequence[PaperFeatures]) -> "FeatureTable":
        return cls({
            "months_since_epoch": np.array([f.months_since_epoch for f in feats], dtype=float),
            "team_size": np.array([f.team_size for f in feats], dtype=float),
            "combined_seniority": np.array([f.combined_seniority for f in feats], dtype=float),
            "journal": np.array([f.journal for f in feats], dtype=object),
            "is_review": np.array([str(bool(f.is_review)) for f in feats], dtype=object),
            "subfield": np.array([f.subfield if f.subfield is not None else MISSING_LEVEL for f in feats],
                                 dtype=object),
        })


# -- terms -------------------------------------------------------------------

def _difference_penalty(m: int, order: int = 2) -> np.ndarray:
    d = np.diff(np.eye(m), n=order, axis=0)
    return d.T @ d


@dataclass
class SmoothTerm:
    """Cubic B-spline smooth with a sum-to-zero constraint absorbed via QR."""

    name: str
    knots: np.ndarray
    lo: float
    hi: float
    constraint: np.ndarray  # Z, (n_basis, n_basis - 1)
    penalty: np.ndarray
    order: int = 4
    kind: str = "spline"

    @classmethod
    def fit(cls, name: str, x: np.ndarray, n_knots: int) -> "SmoothTerm":
        lo, hi = float(np.min(x)), float(np.max(x))
        probs = np.arange(1, n_knots + 1) / (n_knots + 1)
        interior = np.unique(np.quantile(x, probs))
        interior = interior[(interior > lo) & (interior < hi)]
        knots = np.concatenate([[lo] * 4, interior, [hi] * 4])
        basis = cls._basis(knots, np.clip(x, lo, hi))
        m = basis.shape[1]
        col_sums = basis.sum(axis=0)[:, None]
        q, _ = np.linalg.qr(col_sums, mode="complete")
        z = q[:, 1:]
        s = z.T @ _difference_penalty(m) @ z
        s = 0.5 * (s + s.T)
        evals, evecs = np.linalg.eigh(s)
        positive = evals > 1e-9 * evals.max()
        evals = np.where(positive, evals, NULL_SPACE_SHRINK * evals[positive].min())
        s = (evecs * evals) @ evecs.T
        return cls(name, knots, lo, hi, z, 0.5 * (s + s.T))

    @staticmethod
    def _basis(knots, x):
        return BSpline.design_matrix(x, knots, 3, extrapolate=False).toarray()

    @property
    def width(self) -> int:
        return self.constraint.shape[1]

    def design(self, x: np.ndarray) -> np.ndarray:
        x = np.clip(np.asarray(x, dtype=float), self.lo, self.hi)
        return self._basis(self.knots, x) @ self.constraint

    def to_json(self) -> dict:
        return {"kind": self.kind, "name": self.name, "knots": self.knots.tolist(), "lo": self.lo,
                "hi": self.hi, "constraint": self.constraint.tolist(), "penalty": self.penalty.tolist()}

    @classmethod
    def from_json(cls, d: dict) -> "SmoothTerm":
        return cls(d["name"], np.asarray(d["knots"]), d["lo"], d["hi"],
                   np.asarray(d["constraint"]), np.asarray(d["penalty"]))


@dataclass
class LinearTerm:
    """Degraded smooth for features with too few distinct values."""

    name: str
    center: float
    scale: float
    kind: str = "linear"

    @classmethod
    def fit(cls, name: str, x: np.ndarray) -> "LinearTerm":
        sd = float(np.std(x))
        return cls(name, float(np.mean(x)), sd if sd > 0 else 1.0)

    @property
    def width(self) -> int:
        return 1

    @property
    def penalty(self) -> np.ndarray:
        return np.array([[LINEAR_TERM_PENALTY]])

    def design(self, x) -> np.ndarray:
        return ((np.asarray(x, dtype=float) - self.center) / self.scale)[:, None]

    def to_json(self) -> dict:
        return {"kind": self.kind, "name": self.name, "center": self.center, "scale": self.scale}

    @classmethod
    def from_json(cls, d: dict) -> "LinearTerm":
        return cls(d["name"], d["center"], d["scale"])


@dataclass
class CategoricalTerm:
    """Treatment coding against the majority level; unseen levels map to it."""

    name: str
    levels: list[str]
    reference: str
    kind: str = "categorical"

    @classmethod
    def fit(cls, name: str, x: np.ndarray) -> "CategoricalTerm":
        values, counts = np.unique(x.astype(str), return_counts=True)
        order = sorted(range(len(values)), key=lambda i: (-counts[i], values[i]))
        reference = str(values[order[0]])
        return cls(name, [str(v) for v in values], reference)

    @property
    def coded(self) -> list[str]:
        return [lv for lv in self.levels if lv != self.reference]

    @property
    def width(self) -> int:
        return len(self.coded)

    @property
    def penalty(self) -> None:
        return None

    def design(self, x) -> np.ndarray:
        x = np.asarray(x).astype(str)
        known = set(self.levels)
        unseen = sorted({v for v in x if v not in known})
        if unseen:
            warnings.warn(f"unseen {self.name} levels {unseen} mapped to {self.reference!r}",
                          stacklevel=3)
        return np.stack([(x == lv).astype(float) for lv in self.coded], axis=1) if self.coded \
            else np.zeros((len(x), 0))

    def to_json(self) -> dict:
        return {"kind": self.kind, "name": self.name, "levels": self.levels, "reference": self.reference}

    @classmethod
    def from_json(cls, d: dict) -> "CategoricalTerm":
        return cls(d["name"], list(d["levels"]), d["reference"])


_TERM_TYPES = {"spline": SmoothTerm, "linear": LinearTerm, "categorical": CategoricalTerm}


@dataclass
class ModelSpec:
    smooth: tuple[str, ...] = SMOOTH_FEATURES
    categorical: tuple[str, ...] = CATEGORICAL_FEATURES
    n_knots: int = 10
    lam: float | Sequence[float] = 1.0
    select: str = "fixed"  # or "gcv"
    max_iter: int = 100
    tol: float = 1e-8
    ridge: float = 1e-8

    @classmethod
    def intercept_only(cls) -> "ModelSpec":
        return cls(smooth=(), categorical=())

    def with_subfield(self) -> "ModelSpec":
        return ModelSpec(self.smooth, tuple(self.categorical) + ("subfield",), self.n_knots,
                         self.lam, self.select, self.max_iter, self.tol, self.ridge)

    def to_json(self) -> dict:
        lam = list(self.lam) if isinstance(self.lam, (list, tuple)) else self.lam
        return {"smooth": list(self.smooth), "categorical": list(self.categorical), "n_knots": self.n_knots,
                "lam": lam, "select": self.select, "max_iter": self.max_iter, "tol": self.tol,
                "ridge": self.ridge}


# -- likelihood --------------------------------------------------------------

def softmax_reference(eta: np.ndarray) -> np.ndarray:
    """Probabilities from (n, 3) linear predictors, category 0 as reference."""
    full = np.concatenate([np.zeros((eta.shape[0], 1)), eta], axis=1)
    full -= full.max(axis=1, keepdims=True)
    ex = np.exp(full)
    return ex / ex.sum(axis=1, keepdims=True)


def penalized_loglik(X, Y, beta, S, weights=None) -> float:
    """Weighted multinomial log-likelihood minus 0.5 * sum_k beta_k' S beta_k."""
    P = softmax_reference(X @ beta)
    w = np.ones(len(X)) if weights is None else weights
    ll = float(np.sum(w * np.log(np.clip(np.sum(Y * P, axis=1), 1e-300, None))))
    return ll - 0.5 * float(np.sum(beta * (S @ beta)))


def penalized_gradient(X, Y, beta, S, weights=None) -> np.ndarray:
    P = softmax_reference(X @ beta)
    w = np.ones(len(X)) if weights is None else weights
    resid = (Y[:, 1:] - P[:, 1:]) * w[:, None]
    return X.T @ resid - S @ beta


def _neg_hessian(X, P, S, weights) -> np.ndarray:
    # block (k, l) of -H: X' diag(w p_k (d_kl - p_l)) X + d_kl S, on the 3 free categories
    p = X.shape[1]
    H = np.zeros((3 * p, 3 * p))
    Pf = P[:, 1:]
    for k in range(3):
        for l in range(k, 3):
            wk = weights * Pf[:, k] * ((k == l) - Pf[:, l])
            block = X.T @ (X * wk[:, None])
            if k == l:
                block = block + S
            H[k * p:(k + 1) * p, l * p:(l + 1) * p] = block
            if k != l:
                H[l * p:(l + 1) * p, k * p:(k + 1) * p] = block.T
    return H


@dataclass
class FitTrace:
    iterations: int
    converged: bool
    grad_norm: float
    objective_path: list[float] = field(default_factory=list)


def fit_multinomial(X, Y, S, weights=None, beta0=None, max_iter=100, tol=1e-8, ridge=1e-8):
    """Penalized Newton iterations with step halving.

    Maximizes ``penalized_loglik``; accepted steps never decrease it. Returns
    the coefficient matrix (p, 3) and a FitTrace.
    """
    n, p = X.shape
    w = np.ones(n) if weights is None else np.asarray(weights, dtype=float)
    beta = np.zeros((p, 3)) if beta0 is None else beta0.copy()
    obj = penalized_loglik(X, Y, beta, S, w)
    path = [obj]
    converged = False
    gnorm = np.inf
    it = 0
    for it in range(1, max_iter + 1):
        P = softmax_reference(X @ beta)
        grad = (X.T @ ((Y[:, 1:] - P[:, 1:]) * w[:, None]) - S @ beta)
        gvec = grad.T.reshape(-1)
        gnorm = float(np.linalg.norm(gvec))
        if gnorm < tol:
            converged = True
            it -= 1
            break
        H = _neg_hessian(X, P, S, w)
        floor = ridge
        while True:
            try:
                L = np.linalg.cholesky(H + floor * np.eye(3 * p))
                break
            except np.linalg.LinAlgError:
                floor = max(floor * 10, 1e-8)
                warnings.warn(f"penalized Hessian not positive definite; ridge floor raised to {floor:g}",
                              RuntimeWarning, stacklevel=2)
                if floor > 1e6:
                    raise ModelError("penalized Hessian is singular") from None
        step = np.linalg.solve(L.T, np.linalg.solve(L, gvec)).reshape(3, p).T
        t = 1.0
        for _ in range(40):
            cand = beta + t * step
            cand_obj = penalized_loglik(X, Y, cand, S, w)
            if cand_obj >= obj:
                break
            t *= 0.5
        else:
            converged = gnorm < np.sqrt(tol)
            break
        gain = cand_obj - obj
        beta, obj = cand, cand_obj
        path.append(obj)
        if gain <= 1e-15 * max(1.0, abs(obj)) and t < 1.0:
            # no representable progress left along the Newton direction
            P = softmax_reference(X @ beta)
            gnorm = float(np.linalg.norm(X.T @ ((Y[:, 1:] - P[:, 1:]) * w[:, None]) - S @ beta))
            converged = gnorm < np.sqrt(tol)
            break
    return beta, FitTrace(it, converged, gnorm, path)


# -- model -------------------------------------------------------------------

@dataclass
class CategoryProbabilities:
    p_MM: float
    p_WM: float
    p_MW: float
    p_WW: float

    def as_array(self) -> np.ndarray:
        return np.array([self.p_MM, self.p_WM, self.p_MW, self.p_WW])

    @classmethod
    def from_array(cls, a) -> "CategoryProbabilities":
        return cls(*(float(v) for v in a))


@dataclass
class ExpectationModel:
    spec: ModelSpec
    terms: list
    coef: np.ndarray  # (p, 3), columns WM, MW, WW against MM
    lambdas: list[float]
    deviance: float
    trace: FitTrace | None = None
    edf: float | None = None

    @property
    def n_coef(self) -> int:
        return self.coef.shape[0]

    def design(self, table: FeatureTable) -> np.ndarray:
        cols = [np.ones((len(table), 1))]
        for term in self.terms:
            cols.append(term.design(table[term.name]))
        return np.concatenate(cols, axis=1)

    def predict_proba(self, table: FeatureTable) -> np.ndarray:
        P = softmax_reference(self.design(table) @ self.coef)
        # renormalize so rows sum to 1 to the last ulp
        return P / P.sum(axis=1, keepdims=True)

    def predict(self, features: PaperFeatures) -> CategoryProbabilities:
        return CategoryProbabilities.from_array(self.predict_proba(FeatureTable.from_features([features]))[0])

    def coef_full(self) -> np.ndarray:
        return np.concatenate([np.zeros((self.n_coef, 1)), self.coef], axis=1)

    def with_reference(self, category: int) -> "ExpectationModel":
        """Same predictions with coefficients re-expressed against another category.

        Only the stored representation changes; ``coef[:, j]`` is then the
        contrast of category ``order[j+1]`` against ``category``.
        """
        full = self.coef_full()
        shifted = full - full[:, [category]]
        out = ExpectationModel(self.spec, self.terms, shifted[:, 1:] - shifted[:, [0]], self.lambdas,
                               self.deviance, self.trace, self.edf)
        out._reference = category
        out._full = shifted
        return out

    def to_json(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "spec": self.spec.to_json(),
            "terms": [t.to_json() for t in self.terms],
            "coef": self.coef.tolist(),
            "lambdas": self.lambdas,
            "deviance": self.deviance,
            "edf": self.edf,
            "categories": [c.name for c in CATEGORIES],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=1, sort_keys=True))

    @classmethod
    def from_json(cls, d: dict) -> "ExpectationModel":
        if d.get("schema_version") != SCHEMA_VERSION:
            raise ModelError(f"model schema version {d.get('schema_version')!r} != {SCHEMA_VERSION}")
        s = d["spec"]
        spec = ModelSpec(tuple(s["smooth"]), tuple(s["categorical"]), s["n_knots"],
                         s["lam"], s["select"], s["max_iter"], s["tol"], s["ridge"])
        terms = [_TERM_TYPES[t["kind"]].from_json(t) for t in d["terms"]]
        return cls(spec, terms, np.asarray(d["coef"], dtype=float), list(d["lambdas"]), d["deviance"],
                   edf=d.get("edf"))

    @classmethod
    def load(cls, path: str | Path) -> "ExpectationModel":
        return cls.from_json(json.loads(Path(path).read_text()))


def one_hot(categories: np.ndarray) -> np.ndarray:
    cats = np.asarray(categories, dtype=int)
    Y = np.zeros((len(cats), N_CAT))
    Y[np.arange(len(cats)), cats] = 1.0
    return Y


def _build_terms(spec: ModelSpec, table: FeatureTable) -> list:
    terms = []
    for name in spec.smooth:
        x = np.asarray(table[name], dtype=float)
        n_distinct = len(np.unique(x))
        if n_distinct < 2:
            logger.info("dropping constant smooth feature %s", name)
            continue
        if n_distinct < spec.n_knots:
            logger.info("feature %s has %d distinct values; using a linear term", name, n_distinct)
            terms.append(LinearTerm.fit(name, x))
        else:
            terms.append(SmoothTerm.fit(name, x, spec.n_knots))
    for name in spec.categorical:
        term = CategoricalTerm.fit(name, np.asarray(table[name]))
        if term.width:
            terms.append(term)
    return terms


def _penalty_matrix(terms, lambdas) -> np.ndarray:
    widths = [1] + [t.width for t in terms]
    p = sum(widths)
    S = np.zeros((p, p))
    start = 1
    li = 0
    for term in terms:
        if term.penalty is not None:
            S[start:start + term.width, start:start + term.width] = lambdas[li] * term.penalty
            li += 1
        start += term.width
    return S


def _edf(X, P, S, weights) -> float:
    H_pen = _neg_hessian(X, P, S, weights)
    H_unp = _neg_hessian(X, P, np.zeros_like(S), weights)
    return float(np.trace(np.linalg.solve(H_pen + 1e-10 * np.eye(len(H_pen)), H_unp)))


def fit(spec: ModelSpec, table: FeatureTable, categories, weights=None,
        allow_degenerate: bool = False) -> ExpectationModel:
    """Fit category probabilities on papers with known category.

    ``categories`` are integer codes 0..3 (MM, WM, MW, WW). Fewer than four
    observed categories raise ModelError unless ``allow_degenerate``.
    """
    cats = np.asarray(categories, dtype=int)
    if np.any((cats < 0) | (cats > 3)):
        raise ModelError("fit requires known categories only")
    present = np.bincount(cats, minlength=N_CAT)
    if np.any(present == 0):
        if not allow_degenerate:
            raise ModelError(f"all four categories must be present; counts {present.tolist()}")
        warnings.warn("fitting with missing categories; probabilities tend to 0 for them", RuntimeWarning,
                      stacklevel=2)
    terms = _build_terms(spec, table)
    n_pen = sum(1 for t in terms if t.penalty is not None)
    Y = one_hot(cats)
    w = np.ones(len(cats)) if weights is None else np.asarray(weights, dtype=float)
    model = ExpectationModel(spec, terms, np.zeros((1 + sum(t.width for t in terms), 3)), [], np.nan)
    X = model.design(table)

    freq = (present + 0.5) / (present.sum() + 2.0)
    beta0 = np.zeros((X.shape[1], 3))
    beta0[0] = np.log(freq[1:] / freq[0])

    def run(lams):
        S = _penalty_matrix(terms, lams)
        beta, trace = fit_multinomial(X, Y, S, w, beta0, spec.max_iter, spec.tol, spec.ridge)
        P = softmax_reference(X @ beta)
        dev = -2.0 * float(np.sum(w * np.log(np.clip(np.sum(Y * P, axis=1), 1e-300, None))))
        return beta, trace, dev, P, S

    if spec.select == "gcv" and n_pen:
        best = None
        n = float(w.sum())
        for lam in GCV_GRID:
            lams = [lam] * n_pen
            beta, trace, dev, P, S = run(lams)
            edf = _edf(X, P, S, w)
            score = n * dev / max(n - edf, 1.0) ** 2
            logger.debug("gcv lambda=%g edf=%.2f score=%.6g", lam, edf, score)
            if best is None or score < best[0]:
                best = (score, lams, beta, trace, dev, edf)
        _, lams, beta, trace, dev, edf = best
    else:
        lam = spec.lam
        lams = list(lam) if isinstance(lam, (list, tuple)) else [float(lam)] * n_pen
        if len(lams) != n_pen:
            raise ModelError(f"expected {n_pen} smoothing parameters, got {len(lams)}")
        beta, trace, dev, P, S = run(lams)
        edf = None
    if not trace.converged:
        warnings.warn(f"expectation model stopped after {trace.iterations} iterations "
                      f"(gradient norm {trace.grad_norm:.3g})", RuntimeWarning, stacklevel=2)
    return ExpectationModel(spec, terms, beta, [float(v) for v in lams], dev, trace, edf)


# -- random draws and imputation --------------------------------------------

def random_draws_expectation(pool_categories) -> CategoryProbabilities:
    """Equal-weight category shares over a pool of citable papers."""
    cats = np.asarray([int(c) for c in pool_categories], dtype=int)
    cats = cats[cats >= 0]
    if len(cats) == 0:
        raise ValueError("random-draws pool is empty")
    return CategoryProbabilities.from_array(np.bincount(cats, minlength=N_CAT) / len(cats))


def pool_shares_before(date_keys, categories, query_keys) -> np.ndarray:
    """Category shares among known-category papers strictly before each query date.

    Returns (len(query_keys), 4); rows with an empty pool are NaN.
    """
    dk = np.asarray(date_keys)
    cats = np.asarray(categories, dtype=int)
    keep = cats >= 0
    dk, cats = dk[keep], cats[keep]
    order = np.argsort(dk, kind="stable")
    dk, cats = dk[order], cats[order]
    cum = np.vstack([np.zeros(N_CAT), np.cumsum(one_hot(cats), axis=0)])
    pos = np.searchsorted(dk, np.asarray(query_keys), side="left")
    counts = cum[pos]
    total = counts.sum(axis=1, keepdims=True)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(total > 0, counts / total, np.nan)


_COMPATIBLE = {
    # (first known, last known)
    (Label.WOMAN, Label.UNKNOWN): (GenderCategory.WM, GenderCategory.WW),
    (Label.MAN, Label.UNKNOWN): (GenderCategory.MM, GenderCategory.MW),
    (Label.UNKNOWN, Label.WOMAN): (GenderCategory.MW, GenderCategory.WW),
    (Label.UNKNOWN, Label.MAN): (GenderCategory.MM, GenderCategory.WM),
}


def compatible_weights(first: Label, last: Label, probs) -> np.ndarray:
    """Probability vector restricted to categories consistent with known labels."""
    probs = np.asarray(probs, dtype=float)
    key = (Label(first), Label(last))
    if key == (Label.UNKNOWN, Label.UNKNOWN):
        w = probs.copy()
    elif key in _COMPATIBLE:
        w = np.zeros(N_CAT)
        for c in _COMPATIBLE[key]:
            w[int(c)] = probs[int(c)]
    else:
        raise ValueError(f"labels {key} are not partially unknown")
    total = w.sum()
    if total <= 0:
        # no mass on compatible categories: split evenly among them
        w = np.zeros(N_CAT)
        cats = _COMPATIBLE.get(key, CATEGORIES)
        w[[int(c) for c in cats]] = 1.0
        total = w.sum()
    return w / total


def impute_unknown(first: Label, last: Label, probs, rng: np.random.Generator) -> GenderCategory:
    """Draw a category for a paper with one or both lead-author labels unknown.

    The draw uses the model probabilities of the compatible categories only,
    so imputed papers carry no gender effect by construction.
    """
    w = compatible_weights(first, last, probs)
    return GenderCategory(int(rng.choice(N_CAT, p=w)))
