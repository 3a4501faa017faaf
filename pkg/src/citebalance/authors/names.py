"""Author name parsing, initials completion and nickname-variant merging."""

from __future__ import annotations

import csv
import re
import unicodedata
from collections import Counter, defaultdict
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Mapping

INITIALS_ONLY = "<initials>"

_PARTICLES = {"van", "von", "de", "der", "den", "del", "della", "da", "di", "du", "la", "le", "dos", "ter"}


def fold(text: str) -> str:
    """Lowercase and strip diacritics."""
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch)).lower().strip()


@dataclass(frozen=True, order=True)
class NameEntry:
    """One author-slot name split into its parts.

    ``first`` is the full first given name, or a single uppercase letter when
    only initials are known. ``middle`` holds middle initials, uppercase.
    """

    family: str
    first: str
    middle: str = ""
    initials_only: bool = False

    @property
    def family_key(self) -> str:
        return fold(self.family)

    @property
    def first_key(self) -> str:
        return fold(self.first)

    @property
    def first_initial(self) -> str:
        return fold(self.first)[:1].upper()

    def key(self) -> tuple:
        return (self.family_key, self.first_key, self.middle, self.initials_only)

    def display(self) -> str:
        parts = [self.first + ("." if self.initials_only else "")]
        parts += [f"{m}." for m in self.middle]
        parts.append(self.family)
        return " ".join(parts)


def _split_given_tokens(given: str) -> list[str]:
    given = given.replace(".", ". ")
    return [tok.strip() for tok in given.split() if tok.strip(" .")]


def _is_initials(tokens: list[str]) -> bool:
    # initials-only entries are all uppercase, frequently without periods ("RJ")
    for tok in tokens:
        letters = tok.replace(".", "").replace("-", "")
        if not letters.isalpha() or not letters.isupper():
            return False
        if len(letters) > 3 and not tok.endswith("."):
            return False
    return True


def parse_author_name(raw: str) -> NameEntry:
    """Parse "Given Middle Family", "G. M. Family" or "Family, Given M."."""
    raw = re.sub(r"\s+", " ", raw.strip())
    if not raw:
        raise ValueError("empty author name")
    if "," in raw:
        family, given = (part.strip() for part in raw.split(",", 1))
    else:
        tokens = raw.split(" ")
        cut = len(tokens) - 1
        while cut > 1 and tokens[cut - 1].lower() in _PARTICLES:
            cut -= 1
        family = " ".join(tokens[cut:])
        given = " ".join(tokens[:cut])
    tokens = _split_given_tokens(given)
    if not tokens:
        return NameEntry(family=family, first=INITIALS_ONLY, middle="", initials_only=True)
    if _is_initials(tokens):
        letters = "".join(tok.replace(".", "").replace("-", "") for tok in tokens)
        return NameEntry(family=family, first=letters[0], middle=letters[1:], initials_only=True)
    first = tokens[0].rstrip(".")
    if first.isupper() and len(first) > 1:
        first = first.title()
    middle = "".join(tok[0].upper() for tok in tokens[1:])
    return NameEntry(family=family, first=first, middle=middle)


class NicknameTable:
    """Variant-to-canonical given-name links.

    Two given names are linked when they are equal or share a canonical name.
    A variant may map to several canonicals ("chris" -> christopher, christina).
    """

    def __init__(self, pairs: Iterable[tuple[str, str]] = ()):
        self._groups: dict[str, set[str]] = defaultdict(set)
        for variant, canonical in pairs:
            v, c = fold(variant), fold(canonical)
            self._groups[v].add(c)
            self._groups[c].add(c)

    @classmethod
    def from_csv(cls, path: str | Path) -> "NicknameTable":
        with Path(path).open(encoding="utf-8", newline="") as fh:
            return cls((row["variant"], row["canonical"]) for row in csv.DictReader(fh))

    @classmethod
    def bundled(cls) -> "NicknameTable":
        ref = resources.files("citebalance.data").joinpath("nicknames.csv")
        with resources.as_file(ref) as path:
            return cls.from_csv(path)

    def groups(self, name: str) -> set[str]:
        key = fold(name)
        return self._groups.get(key, set()) | {key}

    def linked(self, a: str, b: str) -> bool:
        return fold(a) == fold(b) or bool(self.groups(a) & self.groups(b))


def _middles_compatible(a: str, b: str) -> bool:
    # a missing middle initial never conflicts
    return not a or not b or a == b


def _rank(entry: NameEntry, counts: Mapping[NameEntry, int]) -> tuple:
    # most common first; equal counts fall back to the lexicographically smaller form
    return (-counts[entry], entry.display(), entry.key())


def resolve_initials(
    entries: Iterable[NameEntry],
    nicknames: NicknameTable | None = None,
) -> tuple[dict[NameEntry, NameEntry], int]:
    """Complete initials-only entries from full names with the same family name.

    Each initials-only entry is matched against full-name entries with the
    same family name, the same first initial and compatible middle initials.
    When every match is the same given name (or nickname variants of one
    name) the most common completion is assigned; otherwise the entry stays
    unresolved. Returns the mapping for every distinct entry and the number
    of distinct initials-only entries left unresolved.
    """
    nicknames = nicknames or NicknameTable()
    counts = Counter(entries)
    full_by_family: dict[str, list[NameEntry]] = defaultdict(list)
    for entry in counts:
        if not entry.initials_only:
            full_by_family[entry.family_key].append(entry)

    mapping: dict[NameEntry, NameEntry] = {}
    unresolved = 0
    for entry in sorted(counts):
        if not entry.initials_only:
            mapping[entry] = entry
            continue
        matches = [
            cand for cand in full_by_family.get(entry.family_key, [])
            if entry.first != INITIALS_ONLY
            and cand.first_initial == entry.first_initial
            and _middles_compatible(cand.middle, entry.middle)
        ]
        firsts = sorted({m.first_key for m in matches})
        middles = {m.middle for m in matches if m.middle}
        consistent = (
            bool(matches)
            and len(middles | ({entry.middle} if entry.middle else set())) <= 1
            and all(nicknames.linked(a, b) for a in firsts for b in firsts)
        )
        if not consistent:
            mapping[entry] = entry
            unresolved += 1
            continue
        by_first = Counter()
        display = {}
        for m in matches:
            by_first[m.first_key] += counts[m]
            display.setdefault(m.first_key, m.first)
        best = min(by_first, key=lambda k: (-by_first[k], k))
        middle = entry.middle or next(iter(middles), "")
        mapping[entry] = NameEntry(family=entry.family, first=display[best], middle=middle)
    return mapping, unresolved


def _merge_pass(counts: Counter, nicknames: NicknameTable) -> dict[NameEntry, NameEntry]:
    by_family: dict[str, list[NameEntry]] = defaultdict(list)
    for entry in counts:
        by_family[entry.family_key].append(entry)

    target: dict[NameEntry, NameEntry] = {}
    for family_entries in by_family.values():
        for entry in family_entries:
            target[entry] = entry
            if entry.initials_only:
                continue
            matches = [
                other for other in family_entries
                if other != entry and not other.initials_only
                and nicknames.linked(other.first, entry.first)
            ]
            if not matches:
                continue
            group = matches + [entry]
            middles = {m.middle for m in group if m.middle}
            if len(middles) > 1:
                continue
            firsts = sorted({m.first_key for m in group})
            if not all(nicknames.linked(a, b) for a in firsts for b in firsts):
                continue
            target[entry] = min(group, key=lambda e: _rank(e, counts))

    resolved = {}
    for entry in target:
        cur = entry
        while target[cur] != cur:
            cur = target[cur]
        resolved[entry] = cur
    return resolved


def merge_name_variants(
    entries: Iterable[NameEntry],
    nicknames: NicknameTable | None = None,
) -> dict[NameEntry, NameEntry]:
    """Map each distinct entry to its canonical variant.

    Entries sharing a family name whose first names are equal or nickname
    linked collapse to the most frequent variant, unless the candidates carry
    conflicting middle initials. Passes repeat until nothing changes, so the
    result is idempotent.
    """
    nicknames = nicknames or NicknameTable()
    original = Counter(entries)
    mapping = {entry: entry for entry in original}
    while True:
        counts = Counter()
        for entry, n in original.items():
            counts[mapping[entry]] += n
        step = _merge_pass(counts, nicknames)
        if all(step[e] == e for e in step):
            return mapping
        mapping = {entry: step[canon] for entry, canon in mapping.items()}


@dataclass(frozen=True)
class AuthorIdentity:
    id: int
    family: str
    canonical_given: str
    middle_initials: str = ""

    @property
    def initials_only(self) -> bool:
        return self.canonical_given == INITIALS_ONLY or len(self.canonical_given) == 1

    def display(self) -> str:
        parts = [self.canonical_given] + [f"{m}." for m in self.middle_initials] + [self.family]
        return " ".join(parts)


@dataclass
class Authorship:
    """Disambiguated author ids for every record, in author-list order."""

    ids: dict[str, tuple[int, ...]]
    identities: dict[int, AuthorIdentity]
    unresolved_initials: int = 0

    def first(self, doi: str) -> int:
        return self.ids[doi][0]

    def last(self, doi: str) -> int:
        return self.ids[doi][-1]

    def lead(self, doi: str) -> set[int]:
        ids = self.ids[doi]
        return {ids[0], ids[-1]}


def disambiguate(corpus, nicknames: NicknameTable | None = None) -> Authorship:
    """Resolve initials, merge variants and assign stable integer ids."""
    nicknames = nicknames if nicknames is not None else NicknameTable.bundled()
    parsed: dict[str, list[NameEntry]] = {}
    for rec in corpus:
        parsed[rec.doi] = [parse_author_name(a) for a in rec.authors]
    all_entries = [e for names in parsed.values() for e in names]

    completed, unresolved = resolve_initials(all_entries, nicknames)
    completed_entries = [completed[e] for e in all_entries]
    merged = merge_name_variants(completed_entries, nicknames)

    canon = sorted(set(merged.values()), key=lambda e: (e.family_key, e.first_key, e.middle, e.initials_only))
    id_of = {entry: i for i, entry in enumerate(canon)}
    identities = {
        i: AuthorIdentity(
            id=i,
            family=e.family,
            canonical_given=INITIALS_ONLY if e.initials_only else e.first,
            middle_initials=(e.first + e.middle) if e.initials_only and e.first != INITIALS_ONLY else e.middle,
        )
        for e, i in id_of.items()
    }
    ids = {
        doi: tuple(id_of[merged[completed[e]]] for e in names)
        for doi, names in parsed.items()
    }
    return Authorship(ids=ids, identities=identities, unresolved_initials=unresolved)


def seniority_counts(corpus, authorship: Authorship) -> Counter:
    """Papers in the cited window on which each author is first or last author."""
    counts: Counter = Counter()
    for rec in corpus:
        if not corpus.in_cited_window(rec):
            continue
        for author in authorship.lead(rec.doi):
            counts[author] += 1
    return counts


def seniority(author_id: int, corpus, authorship: Authorship) -> int:
    return seniority_counts(corpus, authorship).get(author_id, 0)


def team_productivity(corpus, authorship: Authorship) -> dict[str, int]:
    """Distinct papers led (first or last author) by either lead author of each record."""
    led: dict[int, set[str]] = defaultdict(set)
    for rec in corpus:
        if corpus.in_cited_window(rec):
            for author in authorship.lead(rec.doi):
                led[author].add(rec.doi)
    return {
        rec.doi: len(led[authorship.first(rec.doi)] | led[authorship.last(rec.doi)])
        for rec in corpus
    }
