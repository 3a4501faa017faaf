"""Observed versus expected citation tallies, Δ/δ statistics and their inference.

The central object is :class:`CitationPanel`: one row per citing paper with
at least one candidate citation, plus the candidate edges pointing into an
array of cited units. Bootstrap replicates resample rows (whole reference
lists move together); null randomizations redraw the category of every cited
unit from its probability vector and keep the edge set fixed.
"""

from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import _kernels
from .authors.gender import CATEGORY_NAMES, GenderCategory, Label
from .corpus import CitationEdge
from .expectation import compatible_weights

logger = logging.getLogger(__name__)

SELF_CITE_DEFINITIONS = ("primary", "broad_citing", "broad_cited", "surname_strict", "none")
CONDITIONING = ("ALL", "MM", "WUW", "WM", "MW", "WW")
# citing-category codes (+1 so that UNKNOWN = 0) pooled by each conditioning group
_COND_SLOTS = {
    "ALL": (0, 1, 2, 3, 4),
    "MM": (1,),
    "WUW": (2, 3, 4),
    "WM": (2,),
    "MW": (3,),
    "WW": (4,),
}
STREAM_BOOTSTRAP = 1
STREAM_NULL = 2
STREAM_IMPUTE = 3
MAX_REDRAWS = 20


def _group_index(name: str | GenderCategory) -> int:
    if isinstance(name, (int, GenderCategory)) and not isinstance(name, str):
        return int(name)
    return CATEGORY_NAMES.index(str(name))


# -- self-citations ----------------------------------------------------------

def _families(rec, authorship) -> tuple[str, str]:
    ids = authorship.ids[rec.doi]
    fam = [authorship.identities[ids[0]].family.lower(), authorship.identities[ids[-1]].family.lower()]
    return fam[0], fam[1]


def flag_self_citations(edges: Sequence[CitationEdge], corpus, authorship,
                        definition: str = "primary") -> tuple[tuple[CitationEdge, ...], np.ndarray]:
    """Set the three stored flags on every edge and return the mask for ``definition``.

    ``primary``: a cited lead author is a citing lead author.
    ``broad_citing``: a cited lead author appears anywhere on the citing list.
    ``broad_cited``: a citing lead author appears anywhere on the cited list.
    ``surname_strict``: a cited lead surname equals a citing lead surname.
    ``none`` flags nothing.
    """
    if definition not in SELF_CITE_DEFINITIONS:
        raise ValueError(f"unknown self-citation definition {definition!r}")
    out = []
    mask = np.zeros(len(edges), dtype=bool)
    for k, e in enumerate(edges):
        citing_ids = authorship.ids[e.citing_doi]
        cited_ids = authorship.ids[e.cited_doi]
        citing_lead = {citing_ids[0], citing_ids[-1]}
        cited_lead = {cited_ids[0], cited_ids[-1]}
        primary = bool(citing_lead & cited_lead)
        broad_citing = bool(cited_lead & set(citing_ids))
        broad_cited = bool(citing_lead & set(cited_ids))
        out.append(CitationEdge(e.citing_doi, e.cited_doi, primary, broad_citing, broad_cited))
        if definition == "primary":
            mask[k] = primary
        elif definition == "broad_citing":
            mask[k] = broad_citing
        elif definition == "broad_cited":
            mask[k] = broad_cited
        elif definition == "surname_strict":
            a = set(_families(corpus[e.citing_doi], authorship))
            b = set(_families(corpus[e.cited_doi], authorship))
            mask[k] = bool(a & b)
    return tuple(out), mask


def self_citation_rates(masks: Mapping[str, np.ndarray], citing_categories=None) -> dict:
    """Share of edges flagged per definition, overall and by citing category."""
    out = {}
    for name, m in masks.items():
        m = np.asarray(m, dtype=bool)
        row = {"ALL": float(m.mean()) if len(m) else float("nan")}
        if citing_categories is not None:
            cats = np.asarray(citing_categories)
            for code, cname in enumerate(CATEGORY_NAMES):
                sel = cats == code
                row[cname] = float(m[sel].mean()) if sel.any() else float("nan")
        out[name] = row
    return out


# -- tallies and point statistics ---------------------------------------------

@dataclass(frozen=True)
class CitationTally:
    obs: np.ndarray
    exp: np.ndarray
    total: float

    def __post_init__(self):
        obs = np.asarray(self.obs, dtype=float)
        exp = np.asarray(self.exp, dtype=float)
        object.__setattr__(self, "obs", obs)
        object.__setattr__(self, "exp", exp)
        if abs(obs.sum() - self.total) > 1e-9 * max(1.0, self.total):
            raise ValueError("observed counts do not sum to total")
        if abs(exp.sum() - self.total) > 1e-9 * max(1.0, self.total):
            raise ValueError("expected counts do not sum to total")

    @classmethod
    def from_counts(cls, obs, exp) -> "CitationTally":
        obs = np.asarray(obs, dtype=float)
        return cls(obs, np.asarray(exp, dtype=float), float(obs.sum()))

    def __add__(self, other: "CitationTally") -> "CitationTally":
        return CitationTally(self.obs + other.obs, self.exp + other.exp, self.total + other.total)

    @property
    def obs_share(self) -> np.ndarray:
        return self.obs / self.total

    @property
    def exp_share(self) -> np.ndarray:
        return self.exp / self.total


def tally_references(reference_lists: Iterable[Sequence[str]], categories: Mapping[str, int],
                     probabilities: Mapping[str, Sequence[float]]) -> CitationTally:
    """Direct tally over explicit lists of cited DOIs (unknown categories skipped)."""
    obs = np.zeros(4)
    exp = np.zeros(4)
    for refs in reference_lists:
        for doi in refs:
            c = int(categories[doi])
            if c < 0:
                continue
            obs[c] += 1
            exp += np.asarray(probabilities[doi], dtype=float)
    return CitationTally.from_counts(obs, exp)


def delta_percent(tally: CitationTally, group) -> float:
    g = _group_index(group)
    if tally.total <= 0:
        raise ValueError("no candidate citations")
    if tally.exp[g] <= 0:
        raise ValueError(f"expected count for {CATEGORY_NAMES[g]} is zero")
    return 100.0 * (tally.obs[g] - tally.exp[g]) / tally.exp[g]


def delta_from_shares(obs_share, exp_share, group) -> float:
    """Δ from proportions of a common total (total cancels)."""
    g = _group_index(group)
    return 100.0 * (obs_share[g] - exp_share[g]) / exp_share[g]


def delta_conditional(tallies: Mapping[str, CitationTally], citing_group: str, cited_group) -> float:
    if citing_group == "WUW" and "WUW" not in tallies:
        tally = tallies["WM"] + tallies["MW"] + tallies["WW"]
    else:
        if citing_group not in tallies:
            raise KeyError(f"no tally for citing group {citing_group}")
        tally = tallies[citing_group]
    return delta_percent(tally, cited_group)


@dataclass(frozen=True)
class YearlyOvercitation:
    year: int
    delta_MM: float
    obs_year: float
    obs_MM_year: float
    exp_MM_year: float


def yearly_overcitation(tallies: Mapping[int, CitationTally]) -> list[YearlyOvercitation]:
    out = []
    for year in sorted(tallies):
        t = tallies[year]
        if t.total <= 0:
            warnings.warn(f"year {year} has no candidate citations; dropped", RuntimeWarning, stacklevel=2)
            continue
        out.append(YearlyOvercitation(int(year), 100.0 * (t.obs[0] - t.exp[0]) / t.total,
                                      float(t.total), float(t.obs[0]), float(t.exp[0])))
    return out


def trend_slope(years, values, weights=None) -> float:
    """OLS slope of values on year; ``weights`` gives the volume-weighted variant."""
    x = np.asarray(years, dtype=float)
    y = np.asarray(values, dtype=float)
    if len(x) < 3:
        raise ValueError("trend needs at least 3 points")
    w = np.ones_like(x) if weights is None else np.asarray(weights, dtype=float)
    xm = np.sum(w * x) / w.sum()
    ym = np.sum(w * y) / w.sum()
    sxx = np.sum(w * (x - xm) ** 2)
    if sxx == 0:
        raise ValueError("trend needs at least 2 distinct years")
    return float(np.sum(w * (x - xm) * (y - ym)) / sxx)


@dataclass(frozen=True)
class PaperOvercitation:
    doi: str
    delta_p: float
    obs_p_MM: float
    exp_p_MM: float
    obs_p: float


def paper_overcitation(doi: str, cited_categories: Sequence[int], cited_p_MM: Sequence[float]) -> PaperOvercitation:
    cats = np.asarray(cited_categories, dtype=int)
    p = np.asarray(cited_p_MM, dtype=float)
    keep = cats >= 0
    n = int(keep.sum())
    if n == 0:
        raise ValueError(f"{doi} has no candidate citations")
    obs_mm = float(np.sum(cats[keep] == 0))
    exp_mm = float(p[keep].sum())
    return PaperOvercitation(doi, (obs_mm - exp_mm) / n, obs_mm, exp_mm, float(n))


def weighted_median(y, w) -> float:
    """Weighted median; an even split of weight yields the lower value."""
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if len(y) == 0:
        return float("nan")
    order = np.argsort(y, kind="stable")
    cw = np.cumsum(w[order])
    half = 0.5 * cw[-1]
    k = int(np.searchsorted(cw, half * (1 - 1e-12), side="left"))
    return float(y[order][k])


def holm_bonferroni(p_values: Sequence[float]) -> np.ndarray:
    """Holm step-down adjustment, monotone and capped at 1. NaNs pass through."""
    p = np.asarray(p_values, dtype=float)
    out = np.full_like(p, np.nan)
    ok = np.flatnonzero(~np.isnan(p))
    if len(ok) == 0:
        return out
    if np.any((p[ok] < 0) | (p[ok] > 1)):
        raise ValueError("p-values must lie in [0, 1]")
    m = len(ok)
    order = ok[np.argsort(p[ok], kind="stable")]
    scaled = (m - np.arange(m)) * p[order]
    out[order] = np.minimum(1.0, np.maximum.accumulate(scaled))
    return out


# -- the panel ---------------------------------------------------------------

_LABEL_CODE = {Label.MAN: 0, Label.WOMAN: 1, Label.UNKNOWN: 2}
_CODE_LABEL = {v: k for k, v in _LABEL_CODE.items()}


@dataclass
class CitationPanel:
    row_doi: list[str]
    row_cat: np.ndarray
    row_year: np.ndarray
    edge_row: np.ndarray
    edge_cited: np.ndarray
    cited_doi: list[str]
    cited_cat: np.ndarray
    cited_probs: np.ndarray
    cited_labels: np.ndarray | None = None  # (m, 2) label codes, for imputation
    impute: bool = False
    years: np.ndarray = field(init=False)
    year_idx: np.ndarray = field(init=False)

    def __post_init__(self):
        self.row_cat = np.asarray(self.row_cat, dtype=np.int64)
        self.row_year = np.asarray(self.row_year, dtype=np.int64)
        self.edge_row = np.asarray(self.edge_row, dtype=np.int64)
        self.edge_cited = np.asarray(self.edge_cited, dtype=np.int64)
        self.cited_cat = np.asarray(self.cited_cat, dtype=np.int64)
        self.cited_probs = np.asarray(self.cited_probs, dtype=float)
        self.years, self.year_idx = np.unique(self.row_year, return_inverse=True)
        self.year_idx = self.year_idx.astype(np.int64)
        cum = np.cumsum(self.cited_probs, axis=1)
        cum[:, -1] = 1.0
        self._cum = cum
        self._exp = _kernels.row_prob_sums(self.edge_row, self.cited_probs[self.edge_cited], self.n_rows)
        if self.impute and self.cited_labels is not None:
            unknown = np.flatnonzero(self.cited_cat < 0)
            w = np.array([compatible_weights(_CODE_LABEL[int(a)], _CODE_LABEL[int(b)], self.cited_probs[i])
                          for i, (a, b) in zip(unknown, self.cited_labels[unknown])]).reshape(-1, 4)
            self._unknown = unknown
            self._impute_weights = w
            wc = np.cumsum(w, axis=1)
            if len(wc):
                wc[:, -1] = 1.0
            self._impute_cum = wc
        elif np.any(self.cited_cat < 0):
            raise ValueError("unknown cited categories present without imputation")

    @property
    def n_rows(self) -> int:
        return len(self.row_doi)

    @property
    def n_edges(self) -> int:
        return len(self.edge_row)

    @property
    def n_cited(self) -> int:
        return len(self.cited_doi)

    @property
    def exp(self) -> np.ndarray:
        return self._exp

    def observed(self, cited_cat=None) -> np.ndarray:
        cats = self.cited_cat if cited_cat is None else cited_cat
        if np.any(cats < 0):
            return self.expected_imputation_obs()
        return _kernels.row_category_counts(self.edge_row, cats[self.edge_cited], self.n_rows)

    def expected_imputation_obs(self) -> np.ndarray:
        """Observed counts with each unknown cited unit spread over its compatible categories."""
        obs_w = np.zeros((self.n_cited, 4))
        known = self.cited_cat >= 0
        obs_w[np.flatnonzero(known), self.cited_cat[known]] = 1.0
        if self.impute:
            obs_w[self._unknown] = self._impute_weights
        return _kernels.row_prob_sums(self.edge_row, obs_w[self.edge_cited], self.n_rows)

    @property
    def obs(self) -> np.ndarray:
        if not hasattr(self, "_obs"):
            self._obs = self.observed()
        return self._obs

    def imputed_categories(self, rng: np.random.Generator) -> np.ndarray:
        cats = self.cited_cat.copy()
        if self.impute and len(self._unknown):
            u = rng.random(len(self._unknown))
            cats[self._unknown] = _kernels.draw_categories(self._impute_cum, u)
        return cats

    def null_observed(self, rng: np.random.Generator) -> np.ndarray:
        u = rng.random(self.n_cited)
        return _kernels.null_row_counts(self._cum, u, self.edge_row, self.edge_cited, self.n_rows)

    def null_categories(self, rng: np.random.Generator) -> np.ndarray:
        return _kernels.draw_categories(self._cum, rng.random(self.n_cited))

    def row_groups(self) -> np.ndarray:
        return self.year_idx * 5 + (self.row_cat + 1)

    def totals(self, obs, idx=None) -> np.ndarray:
        """(n_years, 5, 8) obs|exp sums by citing year and citing category (UNKNOWN first)."""
        idx = np.arange(self.n_rows) if idx is None else idx
        vals = np.concatenate([obs, self._exp], axis=1)
        out = _kernels.group_totals(vals, idx, self.row_groups(), len(self.years) * 5)
        return out.reshape(len(self.years), 5, 8)

    def tally(self, conditioning: str = "ALL", year: int | None = None, obs=None) -> CitationTally:
        t = self.totals(self.obs if obs is None else obs)
        if year is not None:
            pos = np.searchsorted(self.years, year)
            if pos >= len(self.years) or self.years[pos] != year:
                return CitationTally(np.zeros(4), np.zeros(4), 0.0)
            t = t[pos:pos + 1]
        s = t[:, list(_COND_SLOTS[conditioning]), :].sum(axis=(0, 1))
        return CitationTally(s[:4], s[4:], float(s[:4].sum()))

    def yearly_tallies(self, conditioning: str = "ALL") -> dict[int, CitationTally]:
        return {int(y): self.tally(conditioning, int(y)) for y in self.years}

    def paper_overcitations(self, obs=None) -> list[PaperOvercitation]:
        obs = self.obs if obs is None else obs
        n = obs.sum(axis=1)
        return [PaperOvercitation(d, float((obs[i, 0] - self._exp[i, 0]) / n[i]), float(obs[i, 0]),
                                  float(self._exp[i, 0]), float(n[i]))
                for i, d in enumerate(self.row_doi)]

    def checksum(self) -> str:
        """Digest of the structure the null model must leave untouched."""
        import hashlib
        h = hashlib.sha256()
        for a in (self.edge_row, self.edge_cited, self.row_cat, np.bincount(self.edge_row, minlength=self.n_rows)):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()


def build_panel(corpus, edges: Sequence[CitationEdge], categories: Mapping[str, int],
                probabilities: Mapping[str, np.ndarray] | None = None,
                edge_probabilities: np.ndarray | None = None,
                self_mask: np.ndarray | None = None,
                impute: bool = False,
                labels: Mapping[str, tuple[Label, Label]] | None = None) -> CitationPanel:
    """Collect candidate citations into a panel.

    Pass ``probabilities`` (per cited DOI) for paper-level expectations, or
    ``edge_probabilities`` aligned with ``edges`` for per-citation ones, in
    which case every edge is its own cited unit. Self-citations in
    ``self_mask`` are dropped; unknown cited categories are dropped unless
    ``impute`` (then ``labels`` gives each DOI's lead-author labels).
    """
    if (probabilities is None) == (edge_probabilities is None):
        raise ValueError("give exactly one of probabilities or edge_probabilities")
    keep = np.ones(len(edges), dtype=bool) if self_mask is None else ~np.asarray(self_mask, dtype=bool)
    rows: dict[str, int] = {}
    units: dict[str, int] = {}
    edge_row, edge_cited, cited_doi, cited_cat, cited_probs, cited_labels = [], [], [], [], [], []
    for k, e in enumerate(edges):
        if not keep[k]:
            continue
        c = int(categories.get(e.cited_doi, -1))
        if c < 0 and not impute:
            continue
        r = rows.setdefault(e.citing_doi, len(rows))
        if edge_probabilities is not None:
            u = len(cited_doi)
            p = edge_probabilities[k]
        else:
            u = units.get(e.cited_doi)
            p = probabilities[e.cited_doi]
            if u is not None:
                edge_row.append(r)
                edge_cited.append(u)
                continue
            u = units[e.cited_doi] = len(cited_doi)
        cited_doi.append(e.cited_doi)
        cited_cat.append(c)
        cited_probs.append(np.asarray(p, dtype=float))
        if impute:
            lab = labels[e.cited_doi] if labels is not None else (Label.UNKNOWN, Label.UNKNOWN)
            cited_labels.append((_LABEL_CODE[Label(lab[0])], _LABEL_CODE[Label(lab[1])]))
        edge_row.append(r)
        edge_cited.append(u)
    row_doi = list(rows)
    return CitationPanel(
        row_doi=row_doi,
        row_cat=[int(categories.get(d, -1)) for d in row_doi],
        row_year=[corpus[d].pub_year for d in row_doi],
        edge_row=np.array(edge_row, dtype=np.int64),
        edge_cited=np.array(edge_cited, dtype=np.int64),
        cited_doi=cited_doi,
        cited_cat=np.array(cited_cat, dtype=np.int64),
        cited_probs=np.array(cited_probs, dtype=float).reshape(-1, 4),
        cited_labels=np.array(cited_labels, dtype=np.int64).reshape(-1, 2) if impute else None,
        impute=impute,
    )


# -- statistics over a panel ---------------------------------------------------

@dataclass(frozen=True)
class StatKey:
    kind: str  # delta_percent | delta_unweighted | trend_slope | trend_slope_weighted | delta_points
    cited_group: str
    citing_group: str

    def label(self) -> str:
        return f"{self.kind}:{self.cited_group}<-{self.citing_group}"


def default_statistics(unweighted: bool = False, per_paper: bool = True) -> list[StatKey]:
    keys = [StatKey("delta_percent", g, c) for c in CONDITIONING for g in CATEGORY_NAMES]
    if unweighted:
        keys += [StatKey("delta_unweighted", g, c) for c in CONDITIONING for g in CATEGORY_NAMES]
    for c in ("ALL", "MM", "WUW"):
        keys.append(StatKey("trend_slope", "MM", c))
        keys.append(StatKey("trend_slope_weighted", "MM", c))
    if per_paper:
        keys += [StatKey("delta_points", "MM", c) for c in ("MM", "WM", "MW", "WW")]
    return keys


class StatisticSet:
    """Evaluates a fixed list of statistics on (possibly resampled) panel rows."""

    def __init__(self, panel: CitationPanel, keys: Sequence[StatKey]):
        self.panel = panel
        self.keys = list(keys)

    def __len__(self) -> int:
        return len(self.keys)

    def evaluate(self, obs: np.ndarray, idx: np.ndarray | None = None) -> np.ndarray:
        panel = self.panel
        with np.errstate(invalid="ignore", divide="ignore"):
            tot = panel.totals(obs, idx)
            need_rows = any(k.kind in ("delta_unweighted", "delta_points") for k in self.keys)
            if need_rows:
                ii = np.arange(panel.n_rows) if idx is None else idx
                o, e, cat = obs[ii], panel.exp[ii], panel.row_cat[ii]
                n = o.sum(axis=1)
            out = np.empty(len(self.keys))
            cache: dict[str, np.ndarray] = {}
            for j, key in enumerate(self.keys):
                slots = list(_COND_SLOTS[key.citing_group])
                g = CATEGORY_NAMES.index(key.cited_group)
                if key.kind == "delta_percent":
                    s = cache.setdefault(key.citing_group, tot[:, slots, :].sum(axis=(0, 1)))
                    out[j] = 100.0 * (s[g] - s[4 + g]) / s[4 + g] if s[4 + g] > 0 else np.nan
                elif key.kind in ("trend_slope", "trend_slope_weighted"):
                    out[j] = _trend_from_totals(panel.years, tot[:, slots, :].sum(axis=1), g,
                                                key.kind == "trend_slope_weighted")
                elif key.kind == "delta_unweighted":
                    m = np.isin(cat + 1, slots) & (n > 0)
                    if not m.any():
                        out[j] = np.nan
                        continue
                    so = np.mean(o[m, g] / n[m])
                    se = np.mean(e[m, g] / n[m])
                    out[j] = 100.0 * (so - se) / se if se > 0 else np.nan
                elif key.kind == "delta_points":
                    m = np.isin(cat + 1, slots) & (n > 0)
                    out[j] = 100.0 * weighted_median((o[m, g] - e[m, g]) / n[m], n[m]) if m.any() else np.nan
                else:
                    raise ValueError(f"unknown statistic kind {key.kind}")
        return out


def _trend_from_totals(years, tot_y, g, weighted) -> float:
    n = tot_y[:, :4].sum(axis=1)
    ok = n > 0
    if ok.sum() < 3:
        return np.nan
    delta = 100.0 * (tot_y[ok, g] - tot_y[ok, 4 + g]) / n[ok]
    x = years[ok].astype(float)
    w = n[ok] if weighted else np.ones(ok.sum())
    xm = np.sum(w * x) / w.sum()
    sxx = np.sum(w * (x - xm) ** 2)
    if sxx == 0:
        return np.nan
    return float(np.sum(w * (x - xm) * (delta - np.sum(w * delta) / w.sum())) / sxx)


# -- resampling -----------------------------------------------------------------

def replicate_rng(seed: int, stream: int, index: int) -> np.random.Generator:
    """Independent generator for replicate ``index`` of ``stream``."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(int(stream), int(index))))


def _run_replicates(job: Callable[[int], np.ndarray], n: int, workers: int) -> np.ndarray:
    if workers > 1 and n > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, range(n)))
    else:
        rows = [job(i) for i in range(n)]
    return np.vstack(rows) if rows else np.zeros((0, 0))


@dataclass
class BootstrapResult:
    low: np.ndarray
    high: np.ndarray
    replicates: np.ndarray
    redraws: int


def bootstrap_replicates(statistic: Callable[[np.ndarray, np.random.Generator], np.ndarray],
                         n_units: int, B: int, seed: int, workers: int = 1,
                         max_redraws: int = MAX_REDRAWS, defined: np.ndarray | None = None) -> tuple[np.ndarray, int]:
    """Resample ``n_units`` with replacement; redraw replicates that come out undefined.

    ``statistic(idx, rng)`` returns a vector. A replicate is redrawn (at most
    ``max_redraws`` times) while any entry flagged in ``defined`` is NaN.
    """
    if B < 1:
        raise ValueError("B must be >= 1")
    redraw_count = [0] * B

    def job(i):
        rng = replicate_rng(seed, STREAM_BOOTSTRAP, i)
        for attempt in range(max_redraws + 1):
            idx = rng.integers(0, n_units, n_units)
            val = np.atleast_1d(np.asarray(statistic(idx, rng), dtype=float))
            bad = np.isnan(val) if defined is None else (np.isnan(val) & defined)
            if not bad.any():
                break
            redraw_count[i] = attempt + 1
        return val

    reps = _run_replicates(job, B, workers)
    redraws = sum(redraw_count)
    if redraws:
        logger.info("bootstrap redrew %d undefined replicates", redraws)
    return reps, redraws


def percentile_interval(replicates: np.ndarray, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    a = 100.0 * (1 - level) / 2
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        lo, hi = np.nanpercentile(replicates, [a, 100.0 - a], axis=0)
    return lo, hi


def bootstrap_ci(statistic, n_units: int, B: int, seed: int, workers: int = 1,
                 level: float = 0.95) -> BootstrapResult:
    reps, redraws = bootstrap_replicates(statistic, n_units, B, seed, workers)
    lo, hi = percentile_interval(reps, level)
    return BootstrapResult(lo, hi, reps, redraws)


def null_distribution(null_statistic: Callable[[np.random.Generator], np.ndarray], R: int, seed: int,
                      workers: int = 1) -> np.ndarray:
    if R < 1:
        raise ValueError("R must be >= 1")

    def job(i):
        return np.atleast_1d(np.asarray(null_statistic(replicate_rng(seed, STREAM_NULL, i)), dtype=float))

    return _run_replicates(job, R, workers)


def null_pvalue(observed, null_values: np.ndarray) -> np.ndarray:
    """(1 + #{|null| >= |observed|}) / (R + 1), per column; NaN nulls count as not exceeding."""
    obs = np.atleast_1d(np.asarray(observed, dtype=float))
    null = np.asarray(null_values, dtype=float).reshape(len(null_values), -1)
    tol = 1e-12 * np.maximum(1.0, np.abs(obs))
    with np.errstate(invalid="ignore"):
        exceed = np.sum(np.abs(null) >= np.abs(obs) - tol, axis=0)
    p = (1.0 + exceed) / (null.shape[0] + 1.0)
    return np.where(np.isnan(obs), np.nan, p)


# -- estimates ------------------------------------------------------------------

@dataclass(frozen=True)
class ImbalanceEstimate:
    kind: str
    group: str
    conditioning: str
    value: float
    ci_low: float
    ci_high: float
    p_raw: float
    p_adjusted: float
    n_citations: float = float("nan")
    null_mean: float = float("nan")
    null_se: float = float("nan")

    def to_row(self) -> dict:
        return {"statistic": self.kind, "cited_group": self.group, "citing_group": self.conditioning,
                "value": self.value, "ci_low": self.ci_low, "ci_high": self.ci_high, "p_raw": self.p_raw,
                "p_holm": self.p_adjusted, "n_citations": self.n_citations,
                "null_mean": self.null_mean, "null_se": self.null_se}


def clamp_interval(value, low, high):
    """Widen a percentile interval so it contains the point estimate."""
    return np.minimum(low, value), np.maximum(high, value)


@dataclass
class PanelInference:
    keys: list[StatKey]
    value: np.ndarray
    bootstrap: np.ndarray
    null: np.ndarray
    redraws: int = 0

    def estimates(self, n_citations: Mapping[str, float] | None = None,
                  adjust: np.ndarray | None = None) -> list[ImbalanceEstimate]:
        lo, hi = percentile_interval(self.bootstrap) if self.bootstrap.size else (
            np.full(len(self.keys), np.nan), np.full(len(self.keys), np.nan))
        lo, hi = clamp_interval(self.value, lo, hi)
        p = null_pvalue(self.value, self.null) if self.null.size else np.full(len(self.keys), np.nan)
        p_adj = holm_bonferroni(p) if adjust is None else adjust
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            nm = np.nanmean(self.null, axis=0) if self.null.size else np.full(len(self.keys), np.nan)
            ns = np.nanstd(self.null, axis=0, ddof=1) if self.null.shape[0] > 1 else np.full(len(self.keys), np.nan)
        out = []
        for j, k in enumerate(self.keys):
            n = (n_citations or {}).get(k.citing_group, float("nan"))
            out.append(ImbalanceEstimate(k.kind, k.cited_group, k.citing_group, float(self.value[j]),
                                         float(lo[j]), float(hi[j]), float(p[j]), float(p_adj[j]), n,
                                         float(nm[j]), float(ns[j])))
        return out


def infer_panel(panel: CitationPanel, keys: Sequence[StatKey] | None = None, B: int = 1000,
                R: int = 10000, seed: int = 0, workers: int = 1) -> PanelInference:
    """Point values, bootstrap replicates and null randomizations for ``keys``."""
    stats = StatisticSet(panel, keys or default_statistics())
    value = stats.evaluate(panel.obs)
    defined = ~np.isnan(value)

    if panel.impute:
        def boot(idx, rng):
            return stats.evaluate(panel.observed(panel.imputed_categories(rng)), idx)
    else:
        obs = panel.obs

        def boot(idx, rng):
            return stats.evaluate(obs, idx)

    reps, redraws = (bootstrap_replicates(boot, panel.n_rows, B, seed, workers, defined=defined)
                     if B > 0 else (np.zeros((0, len(stats))), 0))
    null = (null_distribution(lambda rng: stats.evaluate(panel.null_observed(rng)), R, seed, workers)
            if R > 0 else np.zeros((0, len(stats))))
    return PanelInference(list(stats.keys), value, reps, null, redraws)


def citations_by_conditioning(panel: CitationPanel) -> dict[str, float]:
    return {c: panel.tally(c).total for c in CONDITIONING}


# -- authorship composition -------------------------------------------------------

def authorship_trend(years, categories, journals=None, B: int = 0, seed: int = 0) -> dict:
    """Slope (percent per year) of the yearly share of papers with a woman lead author.

    Only papers with known category count. Returns {"ALL": {...}, journal: {...}}
    with ``slope`` and, when ``B > 0``, a paper-bootstrap ``ci``.
    """
    years = np.asarray(years, dtype=int)
    cats = np.asarray(categories, dtype=int)
    keep = cats >= 0
    years, cats = years[keep], cats[keep]
    jr = None if journals is None else np.asarray(journals, dtype=object)[keep]

    def slope(y, c):
        uy = np.unique(y)
        if len(uy) < 3:
            raise ValueError("authorship trend needs at least 3 years")
        share = np.array([100.0 * np.mean(c[y == v] > 0) for v in uy])
        return trend_slope(uy, share)

    def entry(y, c, stream):
        out = {"slope": slope(y, c), "n_papers": int(len(y))}
        if B > 0:
            reps = []
            for i in range(B):
                idx = replicate_rng(seed, stream, i).integers(0, len(y), len(y))
                try:
                    reps.append(slope(y[idx], c[idx]))
                except ValueError:
                    continue
            lo, hi = np.percentile(reps, [2.5, 97.5])
            out["ci"] = (float(min(lo, out["slope"])), float(max(hi, out["slope"])))
        return out

    result = {"ALL": entry(years, cats, 100)}
    if jr is not None:
        for k, j in enumerate(sorted(set(jr))):
            m = jr == j
            try:
                result[str(j)] = entry(years[m], cats[m], 101 + k)
            except ValueError:
                logger.warning("journal %s spans fewer than 3 years; no trend", j)
    return result
