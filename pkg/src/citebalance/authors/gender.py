"""Probabilistic gender labels for given names and paper gender categories."""

from __future__ import annotations

import csv
import enum
import json
import logging
import os
import threading
import time
import urllib.error
import urllib.parse
import urllib.request
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping, Protocol, Sequence

from .names import INITIALS_ONLY, AuthorIdentity, Authorship, fold

logger = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 0.70
ENV_URL = "CITEBALANCE_GENDER_URL"
ENV_KEY = "CITEBALANCE_GENDER_API_KEY"
ENV_OFFLINE = "CITEBALANCE_OFFLINE"

# absorbs representation error so that 0.70 and 1 - 0.30 both hit the boundary
_EPS = 1e-12


class Label(str, enum.Enum):
    MAN = "man"
    WOMAN = "woman"
    UNKNOWN = "unknown"


class GenderCategory(enum.IntEnum):
    """First-author gender then last-author gender."""

    UNKNOWN = -1
    MM = 0
    WM = 1
    MW = 2
    WW = 3


CATEGORIES = (GenderCategory.MM, GenderCategory.WM, GenderCategory.MW, GenderCategory.WW)
CATEGORY_NAMES = tuple(c.name for c in CATEGORIES)


def label_for_probability(p_woman: float | None, threshold: float = DEFAULT_THRESHOLD) -> Label:
    if p_woman is None:
        return Label.UNKNOWN
    if p_woman >= threshold - _EPS:
        return Label.WOMAN
    if 1.0 - p_woman >= threshold - _EPS:
        return Label.MAN
    return Label.UNKNOWN


def is_ambiguous(p_woman: float | None, threshold: float = DEFAULT_THRESHOLD) -> bool:
    return label_for_probability(p_woman, threshold) is Label.UNKNOWN


@dataclass(frozen=True)
class GenderAssignment:
    label: Label
    p_woman: float | None
    source: str
    threshold: float = DEFAULT_THRESHOLD


class SourceUnavailable(Exception):
    """A remote lookup failed and there was nothing cached."""


class GenderSource(Protocol):
    kind: str

    def lookup(self, name: str) -> tuple[float, int] | None:
        """Return (p_woman, sample count) or None when the name is unknown."""


def name_key(name: str) -> str:
    return " ".join(fold(name).split())


class LocalGenderTable:
    """CSV table with columns ``name,p_woman,count``; case and diacritics folded."""

    kind = "local_table"

    def __init__(self, table: Mapping[str, tuple[float, int]]):
        self._table = {name_key(k): (float(p), int(n)) for k, (p, n) in table.items()}

    def __len__(self) -> int:
        return len(self._table)

    @classmethod
    def from_csv(cls, path: str | Path) -> "LocalGenderTable":
        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"gender table not found: {path}")
        table = {}
        with path.open(encoding="utf-8", newline="") as fh:
            for row in csv.DictReader(fh):
                p = float(row["p_woman"])
                if not 0.0 <= p <= 1.0:
                    raise ValueError(f"p_woman out of range for {row['name']!r}")
                table[row["name"]] = (p, int(row.get("count") or 0))
        return cls(table)

    @classmethod
    def synthetic(cls) -> "LocalGenderTable":
        ref = resources.files("citebalance.data").joinpath("synthetic_names.csv")
        with resources.as_file(ref) as path:
            return cls.from_csv(path)

    def lookup(self, name: str) -> tuple[float, int] | None:
        return self._table.get(name_key(name))


class StaticSource:
    """In-memory source; handy for tests and manual tables."""

    def __init__(self, table: Mapping[str, float | None], kind: str = "local_table"):
        self.kind = kind
        self._table = {name_key(k): v for k, v in table.items()}

    def lookup(self, name: str) -> tuple[float, int] | None:
        p = self._table.get(name_key(name))
        return None if p is None else (float(p), 0)


class RemoteGenderService:
    """Generic HTTP JSON lookup behind a JSON-lines cache.

    The endpoint is called as ``GET {url}?name=<name>&key=<api key>`` and must
    answer ``{"p_woman": float | null, "count": int}``. Responses (including
    "unknown name") are cached; offline mode answers from the cache only.
    """

    kind = "remote_service"

    def __init__(
        self,
        url: str | None = None,
        api_key: str | None = None,
        cache_path: str | Path | None = None,
        offline: bool | None = None,
        timeout: float = 10.0,
    ):
        self.url = url if url is not None else os.environ.get(ENV_URL)
        self.api_key = api_key if api_key is not None else os.environ.get(ENV_KEY)
        if offline is None:
            offline = os.environ.get(ENV_OFFLINE, "").strip() not in ("", "0", "false")
        self.offline = offline or not self.url
        self.timeout = timeout
        self.cache_path = Path(cache_path) if cache_path else None
        self._lock = threading.Lock()
        self._cache: dict[str, tuple[float | None, int]] = {}
        if self.cache_path and self.cache_path.exists():
            for line in self.cache_path.read_text(encoding="utf-8").splitlines():
                if line.strip():
                    row = json.loads(line)
                    self._cache[name_key(row["name"])] = (row.get("p_woman"), int(row.get("count") or 0))

    def _fetch(self, name: str) -> tuple[float | None, int]:
        query = {"name": name}
        if self.api_key:
            query["key"] = self.api_key
        url = f"{self.url}?{urllib.parse.urlencode(query)}"
        try:
            with urllib.request.urlopen(url, timeout=self.timeout) as resp:
                payload = json.loads(resp.read().decode("utf-8"))
        except (urllib.error.URLError, OSError, ValueError) as exc:
            raise SourceUnavailable(str(exc)) from exc
        p = payload.get("p_woman")
        return (None if p is None else float(p)), int(payload.get("count") or 0)

    def _store(self, name: str, p: float | None, count: int) -> None:
        with self._lock:
            self._cache[name_key(name)] = (p, count)
            if self.cache_path:
                row = {"name": name_key(name), "p_woman": p, "count": count, "timestamp": time.time()}
                with self.cache_path.open("a", encoding="utf-8") as fh:
                    fh.write(json.dumps(row) + "\n")

    def lookup(self, name: str) -> tuple[float, int] | None:
        key = name_key(name)
        with self._lock:
            hit = self._cache.get(key)
        if hit is None:
            if self.offline:
                raise SourceUnavailable(f"{name!r} not cached and service is offline")
            hit = self._fetch(name)
            self._store(name, *hit)
        p, count = hit
        return None if p is None else (p, count)


def _lookup_candidates(given_name: str) -> list[str]:
    # full compound string first, then its first token
    full = given_name.strip()
    out = [full]
    first = full.replace("-", " ").split()[0] if full else ""
    if first and first.lower() != full.lower():
        out.append(first)
    return out


def assign_gender(
    given_name: str,
    sources: Sequence[GenderSource],
    threshold: float = DEFAULT_THRESHOLD,
) -> GenderAssignment:
    """Query sources in order, falling through on absent or ambiguous names."""
    last_p = None
    last_source = "unresolved"
    if not given_name or given_name == INITIALS_ONLY:
        return GenderAssignment(Label.UNKNOWN, None, "unresolved", threshold)
    for source in sources:
        hit = None
        for candidate in _lookup_candidates(given_name):
            try:
                hit = source.lookup(candidate)
            except SourceUnavailable as exc:
                logger.debug("gender source %s unavailable: %s", source.kind, exc)
                hit = None
            if hit is not None:
                break
        if hit is None:
            continue
        last_p, last_source = hit[0], source.kind
        if not is_ambiguous(last_p, threshold):
            break
    return GenderAssignment(label_for_probability(last_p, threshold), last_p, last_source, threshold)


def load_overrides(path: str | Path | None) -> dict[str, Label]:
    """Manual labels keyed by author name or ``"<doi>#first"`` / ``"<doi>#last"``."""
    if not path:
        return {}
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return {(k.lower() if "#" in k else name_key(k)): Label(v) for k, v in data.items()}


def categorize_labels(first: Label, last: Label) -> GenderCategory:
    if Label.UNKNOWN in (first, last):
        return GenderCategory.UNKNOWN
    return GenderCategory[("M" if first is Label.MAN else "W") + ("M" if last is Label.MAN else "W")]


def categorize_paper(record, assignments: Mapping[str, Label] | Sequence[Label]) -> GenderCategory:
    """Category from the first and last author labels.

    ``assignments`` is either the per-slot label sequence for the record's
    author list, or a mapping from raw author name to label.
    """
    if isinstance(assignments, Mapping):
        first = assignments.get(record.first_author, Label.UNKNOWN)
        last = assignments.get(record.last_author, Label.UNKNOWN)
    else:
        first, last = assignments[0], assignments[-1]
    return categorize_labels(Label(first), Label(last))


class GenderResolver:
    """Assigns labels to disambiguated identities with overrides and memoization."""

    def __init__(
        self,
        sources: Sequence[GenderSource],
        threshold: float = DEFAULT_THRESHOLD,
        overrides: Mapping[str, Label] | None = None,
    ):
        self.sources = list(sources)
        self.threshold = threshold
        self.overrides = dict(overrides or {})
        self._memo: dict[str, GenderAssignment] = {}
        self._lock = threading.Lock()

    def for_given_name(self, given: str) -> GenderAssignment:
        key = name_key(given)
        with self._lock:
            hit = self._memo.get(key)
        if hit is None:
            hit = assign_gender(given, self.sources, self.threshold)
            with self._lock:
                self._memo[key] = hit
        return hit

    def for_identity(self, ident: AuthorIdentity) -> GenderAssignment:
        override = self.overrides.get(name_key(ident.display()))
        if override is not None:
            return GenderAssignment(override, None, "manual_override", self.threshold)
        if ident.initials_only:
            return GenderAssignment(Label.UNKNOWN, None, "unresolved", self.threshold)
        return self.for_given_name(ident.canonical_given)

    def assign_all(self, authorship: Authorship, workers: int = 1) -> dict[int, GenderAssignment]:
        idents = sorted(authorship.identities.values(), key=lambda i: i.id)
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(self.for_identity, idents))
        else:
            results = [self.for_identity(i) for i in idents]
        return {ident.id: res for ident, res in zip(idents, results)}

    def categories(
        self,
        corpus,
        authorship: Authorship,
        assignments: Mapping[int, GenderAssignment],
    ) -> dict[str, GenderCategory]:
        out = {}
        for rec in corpus:
            ids = authorship.ids[rec.doi]
            first = assignments[ids[0]].label
            last = assignments[ids[-1]].label
            first = self.overrides.get(f"{rec.doi}#first", first)
            last = self.overrides.get(f"{rec.doi}#last", last)
            if len(ids) == 1:
                last = first
            out[rec.doi] = categorize_labels(first, last)
        return out


def category_counts(categories: Iterable[GenderCategory]) -> Counter:
    return Counter(GenderCategory(c) for c in categories)
