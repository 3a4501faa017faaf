"""Synthetic corpora with known authorship composition and citation bias.

Papers get a (first, last) gender pair from a per-year base rate and a
homophily parameter, authors drawn from a fixed pool, and references drawn
without replacement from strictly earlier papers with weights
``bias_matrix[citing category][cited category]``. Author given names come from
the bundled table, so the gender pipeline resolves them exactly.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import ArticleRecord, Corpus, write_corpus

ORACLE_MAX_PAPERS = 5000
_CONSONANTS = "bdfghklmnprstvz"
_VOWELS = "aeiou"


class SynthError(ValueError):
    pass


@dataclass
class SynthConfig:
    n_authors: int = 600
    n_papers: int = 2000
    years: tuple[int, int] = (1995, 2018)
    citing_window: tuple[int, int] = (2009, 2018)
    base_p_woman: float | Mapping[int, float] = 0.3
    p_woman_trend: float = 0.0  # added per year after the first, when base_p_woman is a float
    homophily_strength: float = 0.0
    bias_matrix: Sequence[Sequence[float]] = field(default_factory=lambda: np.ones((4, 4)).tolist())
    self_cite_rate: float = 0.05
    refs_mean: float = 2.0
    refs_min: int = 0
    mean_extra_authors: float = 2.0
    single_author_rate: float = 0.05
    journals: tuple[str, ...] = ("J1", "J2", "J3", "J4", "J5")
    review_rate: float = 0.05
    subfields: tuple[str, ...] = ()
    ambiguous_name_rate: float = 0.0
    initials_rate: float = 0.0
    seed: int = 0

    def p_woman(self, year: int) -> float:
        if isinstance(self.base_p_woman, Mapping):
            return float(self.base_p_woman[year] if year in self.base_p_woman else self.base_p_woman[str(year)])
        return float(self.base_p_woman) + self.p_woman_trend * (year - self.years[0])

    def validate(self) -> None:
        if self.n_papers < 1:
            raise SynthError("infeasible config: n_papers must be at least 1")
        if self.n_authors < 2:
            raise SynthError("infeasible config: need at least 2 authors")
        if self.years[0] > self.years[1]:
            raise SynthError("infeasible config: empty year span")
        if self.refs_min > 0:
            raise SynthError("infeasible config: the earliest paper cannot have references (refs_min > 0)")
        bias = np.asarray(self.bias_matrix, dtype=float)
        if bias.shape != (4, 4) or np.any(bias <= 0):
            raise SynthError("bias_matrix must be 4x4 with positive entries")
        for y in range(self.years[0], self.years[1] + 1):
            if not 0.0 <= self.p_woman(y) <= 1.0:
                raise SynthError(f"base_p_woman out of [0, 1] in {y}")
        for name in ("homophily_strength", "self_cite_rate", "single_author_rate", "review_rate",
                     "ambiguous_name_rate", "initials_rate"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise SynthError(f"{name} must lie in [0, 1]")

    def to_json(self) -> dict:
        d = asdict(self)
        d["bias_matrix"] = np.asarray(self.bias_matrix, dtype=float).tolist()
        if isinstance(self.base_p_woman, Mapping):
            d["base_p_woman"] = {str(k): float(v) for k, v in self.base_p_woman.items()}
        return d

    @classmethod
    def from_json(cls, d: Mapping) -> "SynthConfig":
        d = dict(d)
        for key in ("years", "citing_window", "journals", "subfields"):
            if key in d:
                d[key] = tuple(d[key])
        if isinstance(d.get("base_p_woman"), Mapping):
            d["base_p_woman"] = {int(k): float(v) for k, v in d["base_p_woman"].items()}
        return cls(**d)


@dataclass
class GroundTruth:
    bias_matrix: list
    homophily_strength: float
    categories: dict[str, int]
    genders: dict[str, tuple[str, str]]
    p_woman_by_year: dict[int, float]
    self_citations: list[tuple[str, str]]

    def to_json(self) -> dict:
        return {
            "bias_matrix": self.bias_matrix,
            "homophily_strength": self.homophily_strength,
            "categories": self.categories,
            "genders": {k: list(v) for k, v in self.genders.items()},
            "p_woman_by_year": {str(k): v for k, v in self.p_woman_by_year.items()},
            "self_citations": [list(e) for e in self.self_citations],
        }

    @classmethod
    def from_json(cls, d: Mapping) -> "GroundTruth":
        return cls(d["bias_matrix"], d["homophily_strength"], dict(d["categories"]),
                   {k: tuple(v) for k, v in d["genders"].items()},
                   {int(k): v for k, v in d["p_woman_by_year"].items()},
                   [tuple(e) for e in d["self_citations"]])


def _name_table() -> list[tuple[str, float]]:
    ref = resources.files("citebalance.data").joinpath("synthetic_names.csv")
    with resources.as_file(ref) as path, open(path, encoding="utf-8", newline="") as fh:
        return [(row["name"], float(row["p_woman"])) for row in csv.DictReader(fh)]


def family_name(index: int) -> str:
    """Unique pronounceable surname for an author index."""
    sylls = []
    n = index
    for _ in range(3):
        n, r = divmod(n, len(_CONSONANTS) * len(_VOWELS))
        sylls.append(_CONSONANTS[r // len(_VOWELS)] + _VOWELS[r % len(_VOWELS)])
    word = "".join(sylls) + ("r" + str(n) if n else "r")
    return word.capitalize()


def _pick_given(rng, is_woman: bool, ambiguous: bool, names) -> str:
    if ambiguous:
        pool = [n for n, p in names if p == 0.5]
    elif is_woman:
        pool = [n for n, p in names if p >= 0.75]
    else:
        pool = [n for n, p in names if p <= 0.25]
    return pool[int(rng.integers(len(pool)))]


def _category(first_woman: bool, last_woman: bool) -> int:
    return int(first_woman) + 2 * int(last_woman)


def generate(config: SynthConfig) -> tuple[Corpus, GroundTruth]:
    config.validate()
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    names = _name_table()
    bias = np.asarray(config.bias_matrix, dtype=float)
    y0, y1 = config.years

    # author pool with fixed gender and name
    share = float(np.mean([config.p_woman(y) for y in range(y0, y1 + 1)]))
    n_women = int(np.clip(round(config.n_authors * share), 1, config.n_authors - 1))
    woman = np.zeros(config.n_authors, dtype=bool)
    woman[rng.permutation(config.n_authors)[:n_women]] = True
    ambiguous = rng.random(config.n_authors) < config.ambiguous_name_rate
    given = [_pick_given(rng, bool(woman[a]), bool(ambiguous[a]), names) for a in range(config.n_authors)]
    family = [family_name(a) for a in range(config.n_authors)]
    men_ids = np.flatnonzero(~woman)
    women_ids = np.flatnonzero(woman)

    # dates in temporal order
    n = config.n_papers
    months = np.sort(rng.integers(0, (y1 - y0 + 1) * 12, n))
    years = y0 + months // 12
    month_of_year = months % 12 + 1
    dkey = years * 12 + month_of_year - 1

    first = np.empty(n, dtype=np.int64)
    last = np.empty(n, dtype=np.int64)
    cats = np.empty(n, dtype=np.int64)
    teams: list[list[int]] = []
    for i in range(n):
        p = config.p_woman(int(years[i]))
        fw = rng.random() < p
        single = rng.random() < config.single_author_rate
        if single:
            lw = fw
        elif rng.random() < config.homophily_strength:
            lw = fw
        else:
            lw = rng.random() < p
        pool_f = women_ids if fw else men_ids
        a_f = int(pool_f[rng.integers(len(pool_f))])
        if single:
            team = [a_f]
        else:
            pool_l = women_ids if lw else men_ids
            a_l = a_f
            while a_l == a_f:
                a_l = int(pool_l[rng.integers(len(pool_l))])
            k = int(rng.poisson(config.mean_extra_authors))
            middle = []
            while len(middle) < k:
                m = int(rng.integers(config.n_authors))
                if m not in (a_f, a_l) and m not in middle:
                    middle.append(m)
                if len(middle) >= config.n_authors - 2:
                    break
            team = [a_f] + middle + [a_l]
        teams.append(team)
        first[i], last[i] = team[0], team[-1]
        cats[i] = _category(bool(woman[team[0]]), bool(woman[team[-1]]))

    # references, weighted without replacement from strictly earlier papers
    led: dict[int, list[int]] = {}
    refs: list[list[int]] = [[] for _ in range(n)]
    self_cites: list[tuple[int, int]] = []
    n_earlier = np.searchsorted(dkey, dkey, side="left")
    for i in range(n):
        pool = int(n_earlier[i])
        k = min(int(rng.poisson(config.refs_mean)), pool)
        if k > 0:
            own = sorted({j for a in {first[i], last[i]} for j in led.get(int(a), []) if j < pool})
            chosen: list[int] = []
            n_self = int(rng.binomial(k, config.self_cite_rate)) if own else 0
            if n_self:
                pick = rng.permutation(len(own))[:n_self]
                chosen = [own[t] for t in pick]
                self_cites.extend((i, j) for j in chosen)
            need = k - len(chosen)
            if need > 0:
                w = bias[cats[i], cats[:pool]].copy()
                w[chosen] = 0.0
                with np.errstate(divide="ignore"):
                    keys = np.log(rng.random(pool)) / w
                keys[w == 0] = -np.inf
                top = np.argpartition(-keys, need - 1)[:need] if need < pool else np.arange(pool)
                top = top[np.isfinite(keys[top])]
                chosen += sorted(int(t) for t in top)
            refs[i] = sorted(set(chosen))
        for a in {int(first[i]), int(last[i])}:
            led.setdefault(a, []).append(i)

    seed_tag = f"{config.seed}"
    dois = [f"10.5555/synth.{seed_tag}.{i:05d}" for i in range(n)]
    inbound = np.zeros(n, dtype=np.int64)
    for i in range(n):
        for j in refs[i]:
            inbound[j] += 1
    journals = [config.journals[int(rng.integers(len(config.journals)))] for _ in range(n)]
    reviews = rng.random(n) < config.review_rate
    subf = ([config.subfields[int(rng.integers(len(config.subfields)))] for _ in range(n)]
            if config.subfields else [None] * n)
    initials = rng.random((n, max(len(t) for t in teams))) < config.initials_rate

    records = []
    for i in range(n):
        authors = []
        for s, a in enumerate(teams[i]):
            g = given[a]
            authors.append(f"{g[0]}. {family[a]}" if initials[i, s] else f"{g} {family[a]}")
        records.append(ArticleRecord(
            doi=dois[i], journal=journals[i], pub_year=int(years[i]), pub_month=int(month_of_year[i]),
            authors=tuple(authors), references=tuple(dois[j] for j in refs[i]), is_review=bool(reviews[i]),
            subfield=subf[i], inbound_citation_count=int(inbound[i]),
        ))
    corpus = Corpus.from_records(records, citing_window=tuple(config.citing_window), cited_window=(y0, y1))
    truth = GroundTruth(
        bias_matrix=bias.tolist(),
        homophily_strength=float(config.homophily_strength),
        categories={dois[i]: int(cats[i]) for i in range(n)},
        genders={dois[i]: ("woman" if woman[first[i]] else "man", "woman" if woman[last[i]] else "man")
                 for i in range(n)},
        p_woman_by_year={y: config.p_woman(y) for y in range(y0, y1 + 1)},
        self_citations=[(dois[i], dois[j]) for i, j in self_cites],
    )
    return corpus, truth


def write_synthetic(corpus: Corpus, truth: GroundTruth, out_dir: str | Path, stem: str = "synthetic") -> tuple[Path, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    corpus_path = out / f"{stem}.jsonl"
    truth_path = out / f"{stem}.truth.json"
    write_corpus(corpus, corpus_path)
    truth_path.write_text(json.dumps(truth.to_json(), indent=1, sort_keys=True) + "\n", encoding="utf-8")
    return corpus_path, truth_path


def corpus_checksum(corpus: Corpus) -> str:
    h = hashlib.sha256()
    for rec in corpus:
        h.update(json.dumps(rec.to_json(), sort_keys=True).encode())
    return h.hexdigest()


def oracle_expected(corpus: Corpus, truth: GroundTruth, citations: Mapping[str, Sequence[str]]):
    """Expected category counts by enumerating the generator's draw distribution.

    ``citations`` maps each citing DOI to its candidate cited DOIs. Each
    citation is treated as one weighted draw from the papers strictly earlier
    than the citing paper, weights ``bias[citing][cited]`` on true categories.
    In an equal-weight world this is exactly the pool share. Observed counts
    use the true categories of the cited papers.
    """
    from .imbalance import CitationTally

    if len(corpus) > ORACLE_MAX_PAPERS:
        raise SynthError(f"oracle limited to {ORACLE_MAX_PAPERS} papers")
    bias = np.asarray(truth.bias_matrix, dtype=float)
    recs = sorted(corpus, key=lambda r: r.date_key)
    dk = np.array([r.date_key for r in recs])
    cats = np.array([truth.categories[r.doi] for r in recs])
    onehot = np.zeros((len(recs), 4))
    onehot[np.arange(len(recs)), cats] = 1.0
    cum = np.vstack([np.zeros(4), np.cumsum(onehot, axis=0)])
    obs = np.zeros(4)
    exp = np.zeros(4)
    for doi, cited in citations.items():
        if not cited:
            continue
        pool = cum[int(np.searchsorted(dk, corpus[doi].date_key, side="left"))]
        w = pool * bias[truth.categories[doi]]
        if w.sum() <= 0:
            raise SynthError(f"{doi} has no earlier papers to cite")
        exp += len(cited) * w / w.sum()
        for c in cited:
            obs[truth.categories[c]] += 1
    return CitationTally.from_counts(obs, exp)
