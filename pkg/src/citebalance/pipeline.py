"""End-to-end analysis: stages, run configuration and output files.

Every stage failure is re-raised as :class:`StageError` naming the stage so
the CLI can report it. Output files carry the run hash, which covers the
configuration (minus output location and worker count) and the corpus
content. Nothing time-dependent is written, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields
from decimal import ROUND_HALF_UP, Decimal
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from . import __version__, expectation, imbalance, inference, network
from .authors import (
    CATEGORY_NAMES,
    GenderCategory,
    GenderResolver,
    Label,
    LocalGenderTable,
    NicknameTable,
    RemoteGenderService,
    disambiguate,
    load_overrides,
    seniority_counts,
    team_productivity,
)
from .corpus import Corpus, link_references, parse_corpus, stratify_by_median, unresolved_counts

logger = logging.getLogger(__name__)

SELF_CITE_ALIASES = {
    "primary": "primary",
    "broad-citing": "broad_citing",
    "broad_citing": "broad_citing",
    "broad-cited": "broad_cited",
    "broad_cited": "broad_cited",
    "surname": "surname_strict",
    "surname_strict": "surname_strict",
    "none": "none",
}
_UNHASHED = ("out", "workers")


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage
        self.message = message


@dataclass
class RunConfig:
    corpus: str | None = None
    corpus_format: str | None = None
    gender_table: str | None = None  # None selects the bundled synthetic-name table
    nickname_table: str | None = None
    cache: str | None = None
    overrides: str | None = None
    out: str = "citebalance_out"
    citing_window: tuple[int, int] = (2009, 2018)
    cited_window: tuple[int, int] = (1995, 2018)
    threshold: float = 0.70
    self_cite_def: str = "primary"
    impute_missing: bool = False
    replicates_bootstrap: int = 1000
    replicates_null: int = 10000
    regression_replicates: int = 1000
    seed: int = 0
    subfield: bool = False
    weighting: str = "citations"  # citations | unweighted | both
    smoothing: str = "fixed"  # fixed | gcv
    lam: float = 1.0
    n_knots: int = 10
    link_middle: bool = False
    median_splits: bool = True
    offline: bool = False
    workers: int = 1

    def __post_init__(self):
        self.citing_window = tuple(int(v) for v in self.citing_window)
        self.cited_window = tuple(int(v) for v in self.cited_window)
        if self.self_cite_def not in SELF_CITE_ALIASES:
            raise ValueError(f"unknown self-citation definition {self.self_cite_def!r}")
        self.self_cite_def = SELF_CITE_ALIASES[self.self_cite_def]
        if self.weighting not in ("citations", "unweighted", "both"):
            raise ValueError(f"unknown weighting mode {self.weighting!r}")

    @classmethod
    def from_mapping(cls, data: Mapping) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known - {"synth"})
        if unknown:
            raise ValueError(f"unknown config keys: {', '.join(unknown)}")
        return cls(**{k: v for k, v in data.items() if k in known})

    def to_json(self) -> dict:
        d = asdict(self)
        d["citing_window"] = list(self.citing_window)
        d["cited_window"] = list(self.cited_window)
        return d

    def options_hash(self, corpus_digest: str = "") -> str:
        d = {k: v for k, v in self.to_json().items() if k not in _UNHASHED}
        d["corpus"] = corpus_digest or d.get("corpus")
        payload = json.dumps({"config": d, "version": __version__}, sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


def corpus_digest(corpus: Corpus) -> str:
    h = hashlib.sha256()
    for doi in sorted(corpus.records):
        h.update(json.dumps(corpus[doi].to_json(), sort_keys=True).encode())
    return h.hexdigest()


# -- stages --------------------------------------------------------------------

@dataclass
class Analysis:
    config: RunConfig
    corpus: Corpus | None = None
    run_hash: str = ""
    authorship: object = None
    assignments: dict = field(default_factory=dict)
    labels: dict = field(default_factory=dict)
    categories: dict = field(default_factory=dict)
    lead_labels: dict = field(default_factory=dict)
    model: expectation.ExpectationModel | None = None
    probabilities: dict = field(default_factory=dict)
    edges: tuple = ()
    self_masks: dict = field(default_factory=dict)
    panel: imbalance.CitationPanel | None = None
    draws_panel: imbalance.CitationPanel | None = None
    provider: network.SnapshotProvider | None = None
    neighborhoods: dict = field(default_factory=dict)


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:  # noqa: BLE001 - attribute every failure to its stage
                raise StageError(name, f"{type(exc).__name__}: {exc}") from exc
        inner.__name__ = fn.__name__
        inner.__doc__ = fn.__doc__
        return inner
    return wrap


@_stage("corpus")
def stage_ingest(a: Analysis) -> Analysis:
    cfg = a.config
    if not cfg.corpus:
        raise ValueError("no corpus path configured")
    path = Path(cfg.corpus)
    if not path.is_file():
        raise FileNotFoundError(f"corpus not found: {path}")
    a.corpus = parse_corpus(path, cfg.corpus_format, cfg.citing_window, cfg.cited_window)
    if len(a.corpus) == 0:
        raise ValueError("corpus has no valid records")
    a.run_hash = cfg.options_hash(corpus_digest(a.corpus))
    return a


def gender_sources(cfg: RunConfig) -> list:
    sources = [LocalGenderTable.from_csv(cfg.gender_table) if cfg.gender_table else LocalGenderTable.synthetic()]
    remote = RemoteGenderService(cache_path=cfg.cache, offline=cfg.offline or None)
    if remote.url or cfg.cache:
        sources.append(remote)
    return sources


@_stage("authors")
def stage_authors(a: Analysis) -> Analysis:
    cfg = a.config
    nick = NicknameTable.from_csv(cfg.nickname_table) if cfg.nickname_table else NicknameTable.bundled()
    a.authorship = disambiguate(a.corpus, nick)
    resolver = GenderResolver(gender_sources(cfg), cfg.threshold, load_overrides(cfg.overrides))
    a.assignments = resolver.assign_all(a.authorship, workers=cfg.workers)
    a.labels = {i: g.label for i, g in a.assignments.items()}
    a.categories = {doi: int(c) for doi, c in resolver.categories(a.corpus, a.authorship, a.assignments).items()}
    for rec in a.corpus:
        ids = a.authorship.ids[rec.doi]
        first = resolver.overrides.get(f"{rec.doi}#first", a.labels[ids[0]])
        last = first if len(ids) == 1 else resolver.overrides.get(f"{rec.doi}#last", a.labels[ids[-1]])
        a.lead_labels[rec.doi] = (first, last)
    return a


def _feature_table(a: Analysis, dois: Sequence[str]) -> expectation.FeatureTable:
    sen = seniority_counts(a.corpus, a.authorship)
    epoch = a.config.cited_window[0]
    feats = [expectation.build_features(a.corpus[d], a.authorship, sen, epoch) for d in dois]
    return expectation.FeatureTable.from_features(feats)


@_stage("expectation")
def stage_fit(a: Analysis) -> Analysis:
    cfg = a.config
    dois = sorted(d for d in a.corpus.records if a.corpus.in_cited_window(a.corpus[d]))
    table = _feature_table(a, dois)
    cats = np.array([a.categories[d] for d in dois])
    known = cats >= 0
    spec = expectation.ModelSpec(lam=cfg.lam, select=cfg.smoothing, n_knots=cfg.n_knots)
    if cfg.subfield:
        spec = spec.with_subfield()
    a.model = expectation.fit(spec, table.take(np.flatnonzero(known)), cats[known])
    probs = a.model.predict_proba(table)
    a.probabilities = {d: probs[i] for i, d in enumerate(dois)}
    return a


@_stage("imbalance")
def stage_panels(a: Analysis) -> Analysis:
    cfg = a.config
    a.edges = link_references(a.corpus)
    masks = {}
    flagged = a.edges
    for name in ("primary", "broad_citing", "broad_cited", "surname_strict"):
        flagged, masks[name] = imbalance.flag_self_citations(a.edges, a.corpus, a.authorship, name)
    a.edges = flagged
    masks["none"] = np.zeros(len(a.edges), dtype=bool)
    a.self_masks = masks
    mask = masks[cfg.self_cite_def]
    a.panel = imbalance.build_panel(a.corpus, a.edges, a.categories, probabilities=a.probabilities,
                                    self_mask=mask, impute=cfg.impute_missing, labels=a.lead_labels)
    a.draws_panel = _draws_panel(a, mask)
    return a


def random_draws_edge_probabilities(a: Analysis) -> np.ndarray:
    """Per edge, category shares of known papers published before the citing paper."""
    pool = [r for r in a.corpus if a.corpus.in_cited_window(r)]
    shares = expectation.pool_shares_before([r.date_key for r in pool], [a.categories[r.doi] for r in pool],
                                            [a.corpus[e.citing_doi].date_key for e in a.edges])
    return shares.reshape(-1, 4)


def _draws_panel(a: Analysis, mask) -> imbalance.CitationPanel:
    probs = random_draws_edge_probabilities(a)
    empty = np.isnan(probs).any(axis=1)
    probs = np.where(empty[:, None], 0.25, probs)
    return imbalance.build_panel(a.corpus, a.edges, a.categories, edge_probabilities=probs,
                                 self_mask=np.asarray(mask) | empty, impute=a.config.impute_missing,
                                 labels=a.lead_labels)


@_stage("network")
def stage_network(a: Analysis) -> Analysis:
    a.provider = network.build_snapshots(a.corpus, a.authorship, a.categories, a.labels, a.config.link_middle)
    a.neighborhoods = {d: a.provider.overrepresentation(d) for d in a.panel.row_doi}
    return a


def run_stages(cfg: RunConfig, upto: str = "network") -> Analysis:
    order = ["corpus", "authors", "expectation", "imbalance", "network"]
    fns = [stage_ingest, stage_authors, stage_fit, stage_panels, stage_network]
    a = Analysis(cfg)
    for name, fn in zip(order, fns):
        fn(a)
        if name == upto:
            break
    return a


# -- estimates -------------------------------------------------------------------

@dataclass
class ResultRow:
    expectation: str
    estimate: imbalance.ImbalanceEstimate


def imbalance_statistics(cfg: RunConfig) -> list[imbalance.StatKey]:
    return imbalance.default_statistics(unweighted=cfg.weighting in ("unweighted", "both"))


@_stage("imbalance")
def estimate_imbalance(a: Analysis) -> list[ResultRow]:
    cfg = a.config
    keys = [k for k in imbalance_statistics(cfg)
            if cfg.weighting != "unweighted" or k.kind != "delta_percent"]
    draw_keys = [k for k in keys if k.kind in ("delta_percent", "trend_slope", "trend_slope_weighted")]
    runs = [("characteristics", a.panel, keys), ("random_draws", a.draws_panel, draw_keys)]
    rows: list[ResultRow] = []
    values, p_all = [], []
    for name, panel, ks in runs:
        if panel.n_rows == 0:
            raise ValueError("no candidate citations")
        res = imbalance.infer_panel(panel, ks, cfg.replicates_bootstrap, cfg.replicates_null, cfg.seed,
                                    cfg.workers)
        est = res.estimates(imbalance.citations_by_conditioning(panel))
        values.append((name, est))
        p_all.extend(e.p_raw for e in est)
    p_adj = imbalance.holm_bonferroni(p_all)
    k = 0
    for name, est in values:
        for e in est:
            rows.append(ResultRow(name, imbalance.ImbalanceEstimate(**{**asdict(e), "p_adjusted": float(p_adj[k])})))
            k += 1
    return rows


@_stage("imbalance")
def median_split_rows(a: Analysis) -> list[dict]:
    """Δ within the lower/upper halves of the cited-paper citation distribution."""
    cfg = a.config
    below, above = stratify_by_median(a.corpus, "inbound_citations")
    keys = [imbalance.StatKey("delta_percent", g, c) for c in ("ALL", "MM", "WUW") for g in CATEGORY_NAMES]
    mask = a.self_masks[cfg.self_cite_def]
    out = []
    for stratum, members in (("below", below), ("above", above)):
        drop = np.array([e.cited_doi not in members for e in a.edges], dtype=bool) | mask
        panel = imbalance.build_panel(a.corpus, a.edges, a.categories, probabilities=a.probabilities,
                                      self_mask=drop, impute=cfg.impute_missing, labels=a.lead_labels)
        if panel.n_rows == 0:
            continue
        res = imbalance.infer_panel(panel, keys, cfg.replicates_bootstrap, 0, cfg.seed, cfg.workers)
        for e in res.estimates():
            out.append({"stratum": stratum, "statistic": e.kind, "cited_group": e.group,
                        "citing_group": e.conditioning, "value": e.value, "ci_low": e.ci_low,
                        "ci_high": e.ci_high})
    return out


@_stage("inference")
def estimate_regressions(a: Analysis) -> dict:
    cfg = a.config
    spec = inference.RegressionSpec()
    R = cfg.regression_replicates
    q = inference.infer_regression(spec, a.panel, a.neighborhoods, R, R, cfg.seed, cfg.workers)
    ls = inference.infer_regression(inference.RegressionSpec(estimator="least_squares"), a.panel,
                                    a.neighborhoods, R, R, cfg.seed, cfg.workers)
    fits = {"quantile": q, "least_squares": ls}
    data = inference.regression_data(a.panel, a.neighborhoods)
    if cfg.weighting in ("unweighted", "both"):
        flat = inference.RegressionData(data.doi, data.group, data.delta, np.ones_like(data.weight),
                                        data.MA_or, data.MMP_or, data.excluded)
        fits["quantile_unweighted"] = inference.fit_quantile(spec, flat)
    # productivity strata: separate fits on teams at or below / above the median
    prod = team_productivity(a.corpus, a.authorship)
    below, above = stratify_by_median(None, "team_productivity", {d: prod[d] for d in data.doi} or {"": 0})
    for name, members in (("less_productive", below), ("more_productive", above)):
        idx = np.array([i for i, d in enumerate(data.doi) if d in members], dtype=np.int64)
        try:
            fits[name] = inference.fit_quantile(spec, data.take(idx))
        except inference.RegressionError as exc:
            logger.warning("no %s fit: %s", name, exc)
    # unconditional per-group location: intercept-only fits per group
    uncond = {}
    for code, g in enumerate(CATEGORY_NAMES):
        m = data.group == code
        if m.any():
            uncond[g] = {
                "median": imbalance.weighted_median(data.delta[m], data.weight[m]),
                "mean": float(np.average(data.delta[m], weights=data.weight[m])),
            }
    return {"fits": fits, "unconditional": uncond, "excluded": data.excluded, "n": len(data.delta)}


# -- diversity statement -------------------------------------------------------------

def round_half_up(x: float) -> int:
    return int(Decimal(str(x)).quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def diversity_counts(dois: Sequence[str], categories: Mapping[str, int]) -> tuple[list[int], int, list[str]]:
    counts = [0, 0, 0, 0]
    unknown = 0
    missing = []
    for d in dois:
        if d not in categories:
            missing.append(d)
            continue
        c = int(categories[d])
        if c < 0:
            unknown += 1
        else:
            counts[c] += 1
    return counts, unknown, missing


def diversity_statement(counts: Sequence[int], n_unknown: int = 0) -> dict:
    """Text and numbers for a reference list's gender-category composition."""
    total = int(sum(counts))
    if total == 0:
        raise ValueError("no cited works with resolvable author genders")
    pct = [round_half_up(100 * Decimal(int(c)) / Decimal(total)) for c in counts]
    parts = [f"{p}% (n = {int(c)}) were {name}" for name, c, p in zip(CATEGORY_NAMES, counts, pct) if c > 0]
    if len(parts) == 1:
        listing = parts[0]
    elif len(parts) == 2:
        listing = f"{parts[0]} and {parts[1]}"
    else:
        listing = ", ".join(parts[:-1]) + f", and {parts[-1]}"
    noun = "work" if total == 1 else "works"
    text = f"Of the {total} cited {noun} whose first and last author genders could be determined, {listing}."
    if n_unknown:
        text += f" {n_unknown} further cited {'work' if n_unknown == 1 else 'works'} could not be categorized."
    return {"text": text, "total": total, "counts": dict(zip(CATEGORY_NAMES, map(int, counts))),
            "percent": dict(zip(CATEGORY_NAMES, pct)), "unknown": int(n_unknown)}


# -- output -------------------------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        if np.isnan(v):
            return "nan"
        return f"{v:.10g}"
    return "" if v is None else str(v)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence], run_hash: str, hash_col="options_hash"):
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(header) + [hash_col])
        for r in rows:
            w.writerow([fmt(v) for v in r] + [run_hash])


def write_json(path: Path, obj, run_hash: str):
    payload = dict(obj)
    payload["run_hash"] = run_hash
    path.write_text(json.dumps(payload, indent=1, sort_keys=True, default=_json_default) + "\n", encoding="utf-8")


def _json_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (Label, GenderCategory)):
        return o.name if isinstance(o, GenderCategory) else o.value
    raise TypeError(f"cannot serialize {type(o).__name__}")


RESULT_COLUMNS = ("statistic", "cited_group", "citing_group", "value", "ci_low", "ci_high", "p_raw", "p_holm",
                  "n_citations", "expectation", "null_mean", "null_se")


def write_results(out: Path, rows: Sequence[ResultRow], run_hash: str) -> Path:
    path = out / "results.csv"
    body = []
    for r in rows:
        e = r.estimate
        body.append([e.kind, e.group, e.conditioning, e.value, e.ci_low, e.ci_high, e.p_raw, e.p_adjusted,
                     e.n_citations, r.expectation, e.null_mean, e.null_se])
    write_csv(path, RESULT_COLUMNS, body, run_hash)
    return path


def write_tallies(out: Path, a: Analysis) -> None:
    rows = []
    for name, panel in (("characteristics", a.panel), ("random_draws", a.draws_panel)):
        for cond in imbalance.CONDITIONING:
            t = panel.tally(cond)
            rows.append([name, cond, *t.obs, *t.exp, t.total])
    header = ["expectation", "citing_group"] + [f"obs_{c}" for c in CATEGORY_NAMES] + \
             [f"exp_{c}" for c in CATEGORY_NAMES] + ["total"]
    write_csv(out / "tallies.csv", header, rows, a.run_hash)

    yearly = []
    for name, panel in (("characteristics", a.panel), ("random_draws", a.draws_panel)):
        for cond in ("ALL", "MM", "WUW"):
            ys = panel.yearly_tallies(cond)
            ys = {y: t for y, t in ys.items() if t.total > 0}
            for y in imbalance.yearly_overcitation(ys):
                yearly.append([name, cond, y.year, y.delta_MM, y.obs_year, y.obs_MM_year, y.exp_MM_year])
    write_csv(out / "yearly.csv", ["expectation", "citing_group", "year", "delta_MM", "obs_year", "obs_MM_year",
                                   "exp_MM_year"], yearly, a.run_hash)

    papers = [[p.doi, CATEGORY_NAMES[a.categories[p.doi]] if a.categories[p.doi] >= 0 else "UNKNOWN",
               p.delta_p, p.obs_p_MM, p.exp_p_MM, p.obs_p] for p in a.panel.paper_overcitations()]
    write_csv(out / "paper_overcitation.csv", ["doi", "citing_category", "delta_p", "obs_p_MM", "exp_p_MM", "obs_p"],
              papers, a.run_hash)


def write_authorship_trend(out: Path, a: Analysis) -> None:
    recs = [r for r in a.corpus if a.corpus.in_cited_window(r)]
    trend = imbalance.authorship_trend([r.pub_year for r in recs], [a.categories[r.doi] for r in recs],
                                       [r.journal for r in recs], B=a.config.replicates_bootstrap, seed=a.config.seed)
    rows = [[k, v["slope"], *(v.get("ci") or (float("nan"), float("nan"))), v["n_papers"]]
            for k, v in trend.items()]
    write_csv(out / "authorship_trend.csv", ["journal", "slope", "ci_low", "ci_high", "n_papers"], rows, a.run_hash)


def write_self_citation_rates(out: Path, a: Analysis) -> None:
    cats = [a.categories.get(e.citing_doi, -1) for e in a.edges]
    rates = imbalance.self_citation_rates({k: v for k, v in a.self_masks.items() if k != "none"}, cats)
    rows = [[name, *(r[c] for c in ("ALL",) + tuple(CATEGORY_NAMES))] for name, r in rates.items()]
    write_csv(out / "self_citation_rates.csv", ["definition", "ALL", *CATEGORY_NAMES], rows, a.run_hash)


def write_regressions(out: Path, reg: dict, run_hash: str) -> None:
    rows = []
    for name, fit in reg["fits"].items():
        for r in fit.rows():
            rows.append([name, r["term"], r["estimate"], r["ci_low"], r["ci_high"], r["p_raw"], r["p_holm"], fit.n])
    write_csv(out / "regression.csv", ["model", "term", "estimate", "ci_low", "ci_high", "p_raw", "p_holm", "n"],
              rows, run_hash)
    q = reg["fits"]["quantile"]
    table = []
    for g in CATEGORY_NAMES:
        row = {"citing_group": g, "unconditional_median": reg["unconditional"].get(g, {}).get("median"),
               "unconditional_mean": reg["unconditional"].get(g, {}).get("mean")}
        if g in q.columns:
            row["conditional"] = inference.conditional_overcitation(q, g)
        table.append(row)
    write_json(out / "conditional_overcitation.json",
               {"rows": table, "excluded": reg["excluded"], "n": reg["n"]}, run_hash)


def write_manifest(out: Path, a: Analysis, extra: Mapping | None = None) -> None:
    cfg = a.config
    model_hash = ""
    if a.model is not None:
        model_hash = hashlib.sha256(json.dumps(a.model.to_json(), sort_keys=True).encode()).hexdigest()[:16]
    manifest = {
        "config": {k: v for k, v in cfg.to_json().items() if k not in _UNHASHED},
        "seed": cfg.seed,
        "B": cfg.replicates_bootstrap,
        "R": cfg.replicates_null,
        "regression_replicates": cfg.regression_replicates,
        "self_citation_definition": cfg.self_cite_def,
        "imputation": cfg.impute_missing,
        "model_hash": model_hash,
        "corpus_digest": corpus_digest(a.corpus) if a.corpus is not None else "",
        "version": __version__,
        "n_records": len(a.corpus) if a.corpus is not None else 0,
        "n_rejections": len(a.corpus.rejections) if a.corpus is not None else 0,
    }
    if a.authorship is not None:
        manifest["unresolved_initials"] = a.authorship.unresolved_initials
    if a.panel is not None:
        manifest["n_edges"] = len(a.edges)
        manifest["n_candidate_citations"] = a.panel.n_edges
        manifest["n_citing_papers"] = a.panel.n_rows
        unresolved = unresolved_counts(a.corpus)
        manifest["unresolved_references"] = int(sum(unresolved.values()))
    if extra:
        manifest.update(extra)
    write_json(out / "manifest.json", manifest, a.run_hash)


def analyze(cfg: RunConfig) -> dict[str, Path]:
    """Run every stage and write all result files to ``cfg.out``."""
    a = run_stages(cfg, upto="network")
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    rows = estimate_imbalance(a)
    write_results(out, rows, a.run_hash)
    write_tallies(out, a)
    write_authorship_trend(out, a)
    write_self_citation_rates(out, a)
    if cfg.median_splits:
        split = median_split_rows(a)
        write_csv(out / "median_split.csv", ["stratum", "statistic", "cited_group", "citing_group", "value",
                                             "ci_low", "ci_high"],
                  [[r[k] for k in ("stratum", "statistic", "cited_group", "citing_group", "value", "ci_low",
                                   "ci_high")] for r in split], a.run_hash)
    network.write_edge_list(a.provider, out / "edges.csv", a.run_hash)
    network.write_neighborhoods(a.neighborhoods.values(), out / "neighborhoods.csv", a.run_hash)
    reg = estimate_regressions(a)
    write_regressions(out, reg, a.run_hash)
    write_json(out / "model.json", a.model.to_json(), a.run_hash)
    write_manifest(out, a)
    return {p.name: p for p in sorted(out.iterdir())}
