"""Bibliographic data model, corpus I/O and DOI reference linking."""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_CITING_WINDOW = (2009, 2018)
DEFAULT_CITED_WINDOW = (1995, 2018)
DEFAULT_MONTH = 6

_DOI_PREFIXES = (
    "https://doi.org/",
    "http://doi.org/",
    "https://dx.doi.org/",
    "http://dx.doi.org/",
    "doi:",
)

CSV_HEADER = (
    "doi",
    "journal",
    "pub_year",
    "pub_month",
    "is_review",
    "authors",
    "references",
    "subfield",
    "inbound_citation_count",
)
REQUIRED_FIELDS = ("doi", "journal", "pub_year", "authors")


class CorpusError(Exception):
    """Raised when a corpus file cannot be read at all."""


def normalize_doi(raw: str) -> str:
    doi = raw.strip().lower()
    for prefix in _DOI_PREFIXES:
        if doi.startswith(prefix):
            doi = doi[len(prefix):]
            break
    return doi.strip()


@dataclass(frozen=True)
class ArticleRecord:
    doi: str
    journal: str
    pub_year: int
    pub_month: int
    authors: tuple[str, ...]
    references: tuple[str, ...] = ()
    is_review: bool = False
    subfield: str | None = None
    inbound_citation_count: int | None = None

    def __post_init__(self):
        if not self.doi:
            raise ValueError("doi must be nonempty")
        if not self.authors:
            raise ValueError("authors must be nonempty")
        if not 1 <= self.pub_month <= 12:
            raise ValueError(f"pub_month out of range: {self.pub_month}")
        if self.inbound_citation_count is not None and self.inbound_citation_count < 0:
            raise ValueError("inbound_citation_count must be nonnegative")

    @property
    def first_author(self) -> str:
        return self.authors[0]

    @property
    def last_author(self) -> str:
        return self.authors[-1]

    @property
    def date_key(self) -> int:
        """Month index used for total temporal ordering."""
        return self.pub_year * 12 + (self.pub_month - 1)

    def to_json(self) -> dict:
        return {
            "doi": self.doi,
            "journal": self.journal,
            "pub_year": self.pub_year,
            "pub_month": self.pub_month,
            "is_review": self.is_review,
            "authors": list(self.authors),
            "references": list(self.references),
            "subfield": self.subfield,
            "inbound_citation_count": self.inbound_citation_count,
        }


@dataclass(frozen=True)
class CitationEdge:
    citing_doi: str
    cited_doi: str
    primary: bool = False
    broad_citing: bool = False
    broad_cited: bool = False

    def __post_init__(self):
        if self.primary and not (self.broad_citing and self.broad_cited):
            raise ValueError("primary self-citation must imply both broad flags")


@dataclass(frozen=True)
class Rejection:
    line: int
    reason: str

    def to_json(self) -> dict:
        return {"line": self.line, "reason": self.reason}


@dataclass
class Corpus:
    records: dict[str, ArticleRecord]
    citing_window: tuple[int, int] = DEFAULT_CITING_WINDOW
    cited_window: tuple[int, int] = DEFAULT_CITED_WINDOW
    rejections: list[Rejection] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ArticleRecord]:
        return iter(self.records.values())

    def __contains__(self, doi: str) -> bool:
        return doi in self.records

    def __getitem__(self, doi: str) -> ArticleRecord:
        return self.records[doi]

    @property
    def dois(self) -> list[str]:
        return list(self.records)

    def in_citing_window(self, rec: ArticleRecord) -> bool:
        lo, hi = self.citing_window
        return lo <= rec.pub_year <= hi

    def in_cited_window(self, rec: ArticleRecord) -> bool:
        lo, hi = self.cited_window
        return lo <= rec.pub_year <= hi

    def with_windows(self, citing=None, cited=None) -> "Corpus":
        return Corpus(
            dict(self.records),
            citing_window=tuple(citing) if citing else self.citing_window,
            cited_window=tuple(cited) if cited else self.cited_window,
            rejections=list(self.rejections),
        )

    @classmethod
    def from_records(cls, records: Iterable[ArticleRecord], **kwargs) -> "Corpus":
        out: dict[str, ArticleRecord] = {}
        for rec in records:
            if rec.doi in out:
                raise ValueError(f"duplicate doi {rec.doi}")
            out[rec.doi] = rec
        return cls(out, **kwargs)


# -- parsing -----------------------------------------------------------------

def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    if value is None:
        return False
    if isinstance(value, (int, float)):
        return bool(value)
    text = str(value).strip().lower()
    if text in ("", "0", "false", "no", "f", "n"):
        return False
    if text in ("1", "true", "yes", "t", "y"):
        return True
    raise ValueError(f"not a boolean: {value!r}")


def _optional_int(value) -> int | None:
    if value is None or (isinstance(value, str) and not value.strip()):
        return None
    return int(value)


def _record_from_mapping(row: Mapping, line: int, rejections: list[Rejection]) -> ArticleRecord:
    for name in REQUIRED_FIELDS:
        value = row.get(name)
        if value is None or (isinstance(value, (str, list)) and len(value) == 0):
            raise ValueError(f"missing required field '{name}'")

    authors = row["authors"]
    if isinstance(authors, str):
        authors = authors.split("|")
    authors = tuple(a.strip() for a in authors if a and a.strip())
    if not authors:
        raise ValueError("missing required field 'authors'")

    refs_raw = row.get("references") or []
    if isinstance(refs_raw, str):
        refs_raw = refs_raw.split("|")
    refs: list[str] = []
    seen: set[str] = set()
    for ref in refs_raw:
        if not ref or not str(ref).strip():
            continue
        doi = normalize_doi(str(ref))
        if doi in seen:
            rejections.append(Rejection(line, f"duplicate reference {doi} counted once"))
            continue
        seen.add(doi)
        refs.append(doi)

    month = _optional_int(row.get("pub_month"))
    subfield = row.get("subfield")
    if isinstance(subfield, str) and not subfield.strip():
        subfield = None
    return ArticleRecord(
        doi=normalize_doi(str(row["doi"])),
        journal=str(row["journal"]).strip(),
        pub_year=int(row["pub_year"]),
        pub_month=DEFAULT_MONTH if month is None else month,
        authors=authors,
        references=tuple(refs),
        is_review=_as_bool(row.get("is_review")),
        subfield=subfield,
        inbound_citation_count=_optional_int(row.get("inbound_citation_count")),
    )


def _iter_rows(path: Path, fmt: str) -> Iterator[tuple[int, Mapping | None, str | None]]:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise CorpusError(f"cannot read corpus file {path}: {exc}") from exc
    if fmt == "jsonl":
        for lineno, line in enumerate(text.splitlines(), start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                yield lineno, None, f"invalid JSON: {exc.msg}"
                continue
            if not isinstance(obj, dict):
                yield lineno, None, "record is not a JSON object"
                continue
            yield lineno, obj, None
    elif fmt == "csv":
        reader = csv.DictReader(io.StringIO(text))
        missing = [c for c in REQUIRED_FIELDS if c not in (reader.fieldnames or [])]
        if missing:
            raise CorpusError(f"CSV header lacks columns {missing}")
        for row in reader:
            # header is line 1
            yield reader.line_num, row, None
    else:
        raise ValueError(f"unknown corpus format {fmt!r}")


def parse_corpus(
    path: str | Path,
    format: str | None = None,
    citing_window: tuple[int, int] = DEFAULT_CITING_WINDOW,
    cited_window: tuple[int, int] = DEFAULT_CITED_WINDOW,
) -> Corpus:
    """Read a JSON-lines or CSV corpus file.

    Malformed rows, duplicate DOIs and rows missing a required field are
    rejected and listed in ``Corpus.rejections``; they never abort the parse.
    """
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    records: dict[str, ArticleRecord] = {}
    rejections: list[Rejection] = []
    for lineno, row, error in _iter_rows(path, format):
        if error is not None:
            rejections.append(Rejection(lineno, error))
            continue
        try:
            rec = _record_from_mapping(row, lineno, rejections)
        except (ValueError, TypeError) as exc:
            rejections.append(Rejection(lineno, str(exc)))
            continue
        if rec.doi in records:
            rejections.append(Rejection(lineno, f"duplicate doi {rec.doi}"))
            continue
        records[rec.doi] = rec
    if rejections:
        logger.warning("%d corpus rows rejected or flagged in %s", len(rejections), path)
    return Corpus(records, citing_window=tuple(citing_window),
                  cited_window=tuple(cited_window), rejections=rejections)


def write_corpus(corpus: Corpus | Iterable[ArticleRecord], path: str | Path,
                 format: str | None = None) -> None:
    path = Path(path)
    if format is None:
        format = "csv" if path.suffix.lower() == ".csv" else "jsonl"
    records = list(corpus)
    if format == "jsonl":
        with path.open("w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec.to_json(), ensure_ascii=False) + "\n")
    elif format == "csv":
        with path.open("w", encoding="utf-8", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for rec in records:
                writer.writerow([
                    rec.doi,
                    rec.journal,
                    rec.pub_year,
                    rec.pub_month,
                    "true" if rec.is_review else "false",
                    "|".join(rec.authors),
                    "|".join(rec.references),
                    rec.subfield or "",
                    "" if rec.inbound_citation_count is None else rec.inbound_citation_count,
                ])
    else:
        raise ValueError(f"unknown corpus format {format!r}")


def write_rejections(rejections: Sequence[Rejection], path: str | Path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for rej in rejections:
            fh.write(json.dumps(rej.to_json()) + "\n")


# -- linking -----------------------------------------------------------------

def link_references(corpus: Corpus) -> tuple[CitationEdge, ...]:
    """Resolve reference lists against the corpus.

    An edge is produced only when the citing paper lies in the citing window,
    the cited paper lies in the cited window, and the cited (year, month) is
    strictly earlier than the citing one. Self-citation flags start False.
    """
    edges = []
    for rec in corpus:
        if not corpus.in_citing_window(rec):
            continue
        for ref in rec.references:
            cited = corpus.records.get(ref)
            if cited is None or not corpus.in_cited_window(cited):
                continue
            if cited.date_key >= rec.date_key:
                continue
            edges.append(CitationEdge(rec.doi, cited.doi))
    return tuple(edges)


def unresolved_counts(corpus: Corpus) -> dict[str, int]:
    """Per citing paper, references that point outside the corpus."""
    out = {}
    for rec in corpus:
        if not corpus.in_citing_window(rec):
            continue
        out[rec.doi] = sum(1 for ref in rec.references if ref not in corpus.records)
    return out


def stratify_by_median(
    corpus: Corpus | None,
    key: str = "inbound_citations",
    values: Mapping[str, float] | None = None,
) -> tuple[set[str], set[str]]:
    """Median split of records into (below-or-equal, above) DOI sets.

    ``key="inbound_citations"`` reads the corpus; ``key="team_productivity"``
    needs precomputed per-DOI ``values`` (see ``authors.team_productivity``).
    Ties at the median fall in the lower stratum.
    """
    if values is None:
        if key != "inbound_citations" or corpus is None:
            raise ValueError(f"key {key!r} requires precomputed values")
        values = inbound_citations(corpus)
    if not values:
        raise ValueError("cannot stratify an empty corpus")
    keys = list(values)
    arr = np.asarray([values[k] for k in keys], dtype=float)
    med = float(np.median(arr))
    below = {k for k, v in zip(keys, arr) if v <= med}
    above = set(keys) - below
    return below, above


def inbound_citations(corpus: Corpus) -> dict[str, int]:
    """Inbound citation counts as recorded on the records.

    Records without the field fall back to counting in-corpus references.
    """
    counted: dict[str, int] = {doi: 0 for doi in corpus.records}
    for rec in corpus:
        for ref in rec.references:
            if ref in counted:
                counted[ref] += 1
    return {
        doi: rec.inbound_citation_count if rec.inbound_citation_count is not None else counted[doi]
        for doi, rec in corpus.records.items()
    }


__all__ = [
    "ArticleRecord",
    "CitationEdge",
    "Corpus",
    "CorpusError",
    "Rejection",
    "inbound_citations",
    "link_references",
    "normalize_doi",
    "parse_corpus",
    "stratify_by_median",
    "unresolved_counts",
    "write_corpus",
    "write_rejections",
]
