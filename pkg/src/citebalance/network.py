"""Temporal co-authorship graph over lead authors and neighborhood composition.

Only first and last authors are nodes. A paper published in month ``m`` sees
the graph built from papers strictly before ``m``; papers from the same month
are invisible to each other.
"""

from __future__ import annotations

import bisect
import csv
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

from .authors.gender import Label


def date_key(year: int, month: int) -> int:
    return year * 12 + (month - 1)


def format_month(key: int) -> str:
    return f"{key // 12:04d}-{key % 12 + 1:02d}"


@dataclass(frozen=True)
class CoauthorSnapshot:
    as_of: tuple[int, int]
    nodes: frozenset
    edges: frozenset  # frozenset of frozenset({a, b})
    pi_M: float
    pi_MM: float


@dataclass(frozen=True)
class NeighborhoodStats:
    doi: str
    N_a_size: int
    N_p_size: int
    pi_M_local: float
    pi_MM_local: float
    MA_or: float
    MMP_or: float
    pi_M: float
    pi_MM: float

    @property
    def available(self) -> bool:
        return bool(np.isfinite(self.MA_or) and np.isfinite(self.MMP_or))


class SnapshotProvider:
    """Append-only record of when each node, edge and lead-authored paper appeared.

    Any snapshot is a filter "first seen < t" over these records, so queries
    at arbitrary months need no per-month copies.
    """

    def __init__(self, papers: Iterable[tuple[str, int, tuple[int, ...], int]],
                 labels: Mapping[int, Label], link_middle: bool = False):
        papers = sorted(papers, key=lambda p: (p[1], p[0]))
        self.labels = dict(labels)
        self.papers = {doi: (dk, ids, cat) for doi, dk, ids, cat in papers}
        self.node_since: dict[int, int] = {}
        self.edge_since: dict[frozenset, int] = {}
        self.adjacency: dict[int, dict[int, int]] = defaultdict(dict)
        self.led: dict[int, list[tuple[int, str]]] = defaultdict(list)
        eligible = {a for _, _, ids, _ in papers for a in (ids[0], ids[-1])}
        for doi, dk, ids, cat in papers:
            lead = {ids[0], ids[-1]}
            for a in lead:
                self.node_since.setdefault(a, dk)
                self.led[a].append((dk, doi))
            members = sorted(lead | ({a for a in ids if a in eligible} if link_middle else set()))
            for i, a in enumerate(members):
                for b in members[i + 1:]:
                    key = frozenset((a, b))
                    if key not in self.edge_since:
                        self.edge_since[key] = dk
                        self.adjacency[a][b] = dk
                        self.adjacency[b][a] = dk
        # cumulative man/known node counts ordered by first appearance
        since = sorted((dk, a) for a, dk in self.node_since.items())
        self._node_dk = np.array([dk for dk, _ in since], dtype=np.int64)
        self._node_man = np.cumsum([self.labels.get(a, Label.UNKNOWN) is Label.MAN for _, a in since])
        self._node_known = np.cumsum([self.labels.get(a, Label.UNKNOWN) is not Label.UNKNOWN for _, a in since])
        self._paper_dk = np.array([dk for _, dk, _, _ in papers], dtype=np.int64)
        self._paper_mm = np.cumsum([cat == 0 for _, _, _, cat in papers])
        self._paper_known = np.cumsum([cat >= 0 for _, _, _, cat in papers])

    @classmethod
    def from_corpus(cls, corpus, authorship, categories: Mapping[str, int], labels: Mapping[int, Label],
                    link_middle: bool = False) -> "SnapshotProvider":
        papers = [(r.doi, r.date_key, tuple(authorship.ids[r.doi]), int(categories.get(r.doi, -1)))
                  for r in corpus]
        return cls(papers, labels, link_middle)

    # -- global base rates
    def pi_M(self, t: int) -> float:
        k = int(np.searchsorted(self._node_dk, t, side="left"))
        if k == 0 or self._node_known[k - 1] == 0:
            return float("nan")
        return float(self._node_man[k - 1] / self._node_known[k - 1])

    def pi_MM(self, t: int) -> float:
        k = int(np.searchsorted(self._paper_dk, t, side="left"))
        if k == 0 or self._paper_known[k - 1] == 0:
            return float("nan")
        return float(self._paper_mm[k - 1] / self._paper_known[k - 1])

    def snapshot(self, year: int, month: int) -> CoauthorSnapshot:
        t = date_key(year, month)
        nodes = frozenset(a for a, dk in self.node_since.items() if dk < t)
        edges = frozenset(e for e, dk in self.edge_since.items() if dk < t)
        return CoauthorSnapshot((year, month), nodes, edges, self.pi_M(t), self.pi_MM(t))

    # -- neighborhoods
    def coauthors(self, author: int, t: int) -> set[int]:
        return {b for b, dk in self.adjacency.get(author, {}).items() if dk < t}

    def author_neighborhood(self, doi: str) -> set[int]:
        dk, ids, _ = self.papers[doi]
        af, al = ids[0], ids[-1]
        return (self.coauthors(af, dk) | self.coauthors(al, dk)) - {af, al}

    def papers_led_before(self, author: int, t: int) -> list[str]:
        items = self.led.get(author, [])
        k = bisect.bisect_left(items, (t, ""))
        return [doi for _, doi in items[:k]]

    def paper_neighborhood(self, doi: str) -> set[str]:
        dk, ids, _ = self.papers[doi]
        people = self.author_neighborhood(doi) | {ids[0], ids[-1]}
        out: set[str] = set()
        for a in people:
            out.update(self.papers_led_before(a, dk))
        return out

    def overrepresentation(self, doi: str) -> NeighborhoodStats:
        dk, _, _ = self.papers[doi]
        n_a = self.author_neighborhood(doi)
        n_p = self.paper_neighborhood(doi)
        known = [self.labels.get(a, Label.UNKNOWN) for a in n_a]
        known = [lab for lab in known if lab is not Label.UNKNOWN]
        cats = [self.papers[d][2] for d in n_p]
        cats = [c for c in cats if c >= 0]
        pi_m, pi_mm = self.pi_M(dk), self.pi_MM(dk)
        local_m = float(np.mean([lab is Label.MAN for lab in known])) if known else float("nan")
        local_mm = float(np.mean([c == 0 for c in cats])) if cats else float("nan")
        return NeighborhoodStats(doi, len(n_a), len(n_p), local_m, local_mm,
                                 local_m - pi_m, local_mm - pi_mm, pi_m, pi_mm)

    def edge_list(self) -> list[tuple[int, int, int]]:
        rows = [(min(e), max(e), dk) for e, dk in self.edge_since.items()]
        return sorted(rows)


def build_snapshots(corpus, authorship, categories, labels, link_middle: bool = False) -> SnapshotProvider:
    return SnapshotProvider.from_corpus(corpus, authorship, categories, labels, link_middle)


def author_neighborhood(doi: str, provider: SnapshotProvider) -> set[int]:
    return provider.author_neighborhood(doi)


def paper_neighborhood(doi: str, provider: SnapshotProvider) -> set[str]:
    return provider.paper_neighborhood(doi)


def overrepresentation(doi: str, provider: SnapshotProvider) -> NeighborhoodStats:
    return provider.overrepresentation(doi)


def neighborhood_table(provider: SnapshotProvider, dois: Iterable[str]) -> list[NeighborhoodStats]:
    return [provider.overrepresentation(d) for d in dois]


def write_edge_list(provider: SnapshotProvider, path: str | Path, run_hash: str = "") -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["author_id_a", "author_id_b", "first_joint_month", "run_hash"])
        for a, b, dk in provider.edge_list():
            w.writerow([a, b, format_month(dk), run_hash])


NEIGHBORHOOD_COLUMNS = ("doi", "N_a_size", "N_p_size", "pi_M_local", "pi_MM_local", "MA_or", "MMP_or",
                        "pi_M", "pi_MM", "available")


def write_neighborhoods(stats: Iterable[NeighborhoodStats], path: str | Path, run_hash: str = "") -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(NEIGHBORHOOD_COLUMNS) + ["run_hash"])
        for s in stats:
            w.writerow([s.doi, s.N_a_size, s.N_p_size] + [f"{v:.10g}" for v in
                       (s.pi_M_local, s.pi_MM_local, s.MA_or, s.MMP_or, s.pi_M, s.pi_MM)]
                       + [int(s.available), run_hash])
