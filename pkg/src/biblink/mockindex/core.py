"""A deterministic simulated academic index with seeded error injection.

Each corpus record becomes at most one indexed document. Whole journal-year
groups may be missing; surviving documents may carry an alternate-language
title, an erratum title, a missing or wrong DOI, or noise in one of year,
author and journal. Every injected error is written to the ground-truth
ledger, so expected retrieval can be computed exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field, fields
from fractions import Fraction
from typing import IO, Iterable, Mapping, Sequence

import numpy as np

from ..corpus import BibRecord
from ..matcher import CandidateResult
from ..queryexpr import (
    And,
    AuthorComposite,
    JournalComposite,
    QueryExpr,
    Strategy,
    TitleEquals,
    YearEquals,
    parse_query,
)
from ..textnorm import (
    NormalizationError,
    normalize_author,
    normalize_journal,
    normalize_title,
)

__all__ = [
    "ABSENT",
    "INDEXED_CLEAN",
    "INDEXED_CORRUPTED",
    "CorruptionProfile",
    "IndexedDocument",
    "MockIndex",
    "TruthEntry",
    "build_index",
    "ledger_predicts_retrieval",
    "read_ledger",
    "render_evaluate",
    "search_index",
    "write_ledger",
]

INDEXED_CLEAN = "indexed_clean"
INDEXED_CORRUPTED = "indexed_corrupted"
ABSENT = "absent"

MISSING_JOURNAL_YEAR = "missing_journal_year"
ALT_LANGUAGE = "alt_language_title"
ERRATUM = "erratum_conflation"
MISSING_DOI = "missing_doi"
WRONG_DOI = "wrong_doi"
NOISE_FIELDS = ("year", "author", "journal")

DEFAULT_RETRIEVAL_THRESHOLD = 0.8


@dataclass(frozen=True)
class CorruptionProfile:
    p_missing_journal_year: float = 0.0
    p_alt_language_title: float = 0.0
    p_erratum_conflation: float = 0.0
    p_missing_doi: float = 0.0
    p_wrong_doi: float = 0.0
    p_metadata_noise: float = 0.0
    seed: int = 0

    def __post_init__(self):
        for f in fields(self):
            if f.name.startswith("p_") and not 0 <= getattr(self, f.name) <= 1:
                raise ValueError(f"{f.name} must lie in [0, 1]")
        if self.p_missing_doi + self.p_wrong_doi > 1:
            raise ValueError("p_missing_doi + p_wrong_doi must not exceed 1")

    @classmethod
    def from_dict(cls, data: Mapping) -> CorruptionProfile:
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown profile keys: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True, indent=2) + "\n"


@dataclass(frozen=True)
class TruthEntry:
    record_id: str
    status: str
    kinds: tuple[str, ...] = ()
    entity_id: str | None = None

    def to_dict(self) -> dict:
        return {"record_id": self.record_id, "status": self.status,
                "kinds": list(self.kinds), "entity_id": self.entity_id}


@dataclass(frozen=True)
class IndexedDocument:
    entity_id: int
    title: str
    year: int
    author: str | None
    journal: str | None
    doi: str | None
    citation_count: int
    words: frozenset[str] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "words", frozenset(self.title.split()))

    def to_entity(self, attributes: Iterable[str] | None = None) -> dict:
        entity = {"Id": self.entity_id, "Ti": self.title, "Y": self.year,
                  "CC": self.citation_count}
        if self.author is not None:
            entity["AA"] = [{"AuN": self.author}]
        if self.journal is not None:
            entity["J"] = {"JN": self.journal}
        if self.doi is not None:
            entity["E"] = {"DOI": self.doi}
        if attributes is not None:
            wanted = {a.split(".")[0] for a in attributes}
            entity = {k: v for k, v in entity.items() if k in wanted or k == "Id"}
        return entity


def _record_rng(seed: int, record_id: str) -> np.random.Generator:
    digest = hashlib.sha256(record_id.encode("utf-8")).digest()
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence([seed & (2**64 - 1), int.from_bytes(digest[:8], "little")])))


def _safe(fn, *args):
    try:
        return fn(*args)
    except NormalizationError:
        return None


def _jaccard(a: frozenset, b: frozenset) -> Fraction:
    union = len(a | b)
    return Fraction(len(a & b), union) if union else Fraction(0)


def _alt_language_title(title: str, language: str | None, threshold: Fraction) -> str:
    """A surrogate title in "another language" that title search cannot find.

    Each word is reversed and a language token is prepended; extra tokens are
    appended until the overlap with the original falls below ``threshold``.
    """
    lang = "".join(ch for ch in (language or "").lower() if ch.isascii() and ch.isalnum())
    if not lang or lang == "en":
        lang = "xx"
    original = title.split()
    words = [lang] + [w[::-1] for w in original]
    orig_set = frozenset(original)
    k = 0
    while _jaccard(orig_set, frozenset(words)) >= threshold:
        k += 1
        words.append(f"{lang}{k}")
    return " ".join(words)


class MockIndex:
    """Immutable document store answering parsed query expressions."""

    def __init__(self, documents: Sequence[IndexedDocument],
                 retrieval_threshold: float = DEFAULT_RETRIEVAL_THRESHOLD):
        self.threshold = Fraction(str(retrieval_threshold))
        if not 0 < self.threshold <= 1:
            raise ValueError("retrieval_threshold must lie in (0, 1]")
        self.documents = tuple(sorted(documents, key=lambda d: d.entity_id))
        self._by_id = {d.entity_id: d for d in self.documents}
        df: dict[str, int] = defaultdict(int)
        for doc in self.documents:
            for w in doc.words:
                df[w] += 1
        self._df = dict(df)
        # prefix filtering: a doc and query with Jaccard >= t share a token
        # among their rarest |x| - ceil(t|x|) + 1 tokens
        prefix_index: dict[str, list[int]] = defaultdict(list)
        for doc in self.documents:
            for w in self._prefix(doc.words):
                prefix_index[w].append(doc.entity_id)
        self._prefix_index = dict(prefix_index)
        self._by_year = self._group(lambda d: d.year)
        self._by_author = self._group(lambda d: d.author)
        self._by_journal = self._group(lambda d: d.journal)

    def _group(self, key) -> dict:
        out: dict = defaultdict(list)
        for doc in self.documents:
            out[key(doc)].append(doc.entity_id)
        return dict(out)

    def _prefix(self, words: frozenset[str]) -> list[str]:
        n = len(words)
        keep = n - math.ceil(self.threshold * n) + 1
        ordered = sorted(words, key=lambda w: (self._df.get(w, 0), w))
        return ordered[:max(keep, 0)]

    def __len__(self) -> int:
        return len(self.documents)

    def get(self, entity_id: int) -> IndexedDocument:
        return self._by_id[entity_id]

    def _title_hits(self, title: str) -> dict[int, Fraction]:
        query = frozenset(title.split())
        hits = {}
        seen = set()
        for w in self._prefix(query):
            for eid in self._prefix_index.get(w, ()):
                if eid in seen:
                    continue
                seen.add(eid)
                doc = self._by_id[eid]
                if doc.title == title:
                    hits[eid] = Fraction(1)
                    continue
                overlap = _jaccard(query, doc.words)
                if overlap >= self.threshold:
                    hits[eid] = overlap
        return hits

    def search(self, expr: QueryExpr, count: int) -> list[tuple[IndexedDocument, Fraction]]:
        terms = expr.operands if isinstance(expr, And) else (expr,)
        title = next((t for t in terms if isinstance(t, TitleEquals)), None)
        if title is not None:
            scored = self._title_hits(title.title)
        else:
            scored = None
            for t in terms:
                ids = set(self._equality_ids(t))
                scored = ({i: Fraction(1) for i in ids} if scored is None
                          else {i: s for i, s in scored.items() if i in ids})
        results = []
        for eid, overlap in scored.items():
            doc = self._by_id[eid]
            if all(self._matches(doc, t) for t in terms if not isinstance(t, TitleEquals)):
                results.append((doc, overlap))
        results.sort(key=lambda pair: (-pair[1], pair[0].entity_id))
        return results[:count]

    def _equality_ids(self, term) -> list[int]:
        if isinstance(term, YearEquals):
            return self._by_year.get(term.year, [])
        if isinstance(term, AuthorComposite):
            return self._by_author.get(term.name, [])
        if isinstance(term, JournalComposite):
            return self._by_journal.get(term.name, [])
        raise TypeError(term)

    @staticmethod
    def _matches(doc: IndexedDocument, term) -> bool:
        if isinstance(term, YearEquals):
            return doc.year == term.year
        if isinstance(term, AuthorComposite):
            return doc.author == term.name
        if isinstance(term, JournalComposite):
            return doc.journal == term.name
        raise TypeError(term)

    def documents_jsonl(self) -> str:
        return "".join(json.dumps(d.to_entity(), sort_keys=True) + "\n" for d in self.documents)


def build_index(
    corpus: Sequence[BibRecord],
    profile: CorruptionProfile,
    retrieval_threshold: float = DEFAULT_RETRIEVAL_THRESHOLD,
) -> tuple[MockIndex, dict[str, TruthEntry]]:
    """Index ``corpus`` under ``profile``; return the index and its ledger.

    Random draws come from a generator keyed on ``(profile.seed, record_id)``
    (and on the journal-year key for group drops), so results do not depend
    on corpus order.
    """
    ids = [r.record_id for r in corpus]
    if len(set(ids)) != len(ids):
        raise ValueError("corpus record_ids are not distinct")
    threshold = Fraction(str(retrieval_threshold))

    groups: dict[tuple, list[BibRecord]] = defaultdict(list)
    for record in corpus:
        journal = _safe(normalize_journal, record.journal_name) or record.journal_name
        groups[(journal, record.pub_year)].append(record)
    dropped_groups = set()
    for key in sorted(groups, key=lambda k: (k[0], k[1])):
        rng = _record_rng(profile.seed, f"journal-year\x00{key[0]}\x00{key[1]}")
        if rng.random() < profile.p_missing_journal_year:
            dropped_groups.add(key)

    ledger: dict[str, TruthEntry] = {}
    documents = []
    for position, record in enumerate(corpus):
        journal_key = _safe(normalize_journal, record.journal_name) or record.journal_name
        if (journal_key, record.pub_year) in dropped_groups:
            ledger[record.record_id] = TruthEntry(record.record_id, ABSENT, (MISSING_JOURNAL_YEAR,))
            continue
        title = _safe(normalize_title, record.title)
        if title is None:
            ledger[record.record_id] = TruthEntry(record.record_id, ABSENT, ("unindexable_title",))
            continue
        rng = _record_rng(profile.seed, record.record_id)
        # a fixed number of draws per record keeps streams aligned across profiles
        u_alt, u_err, u_doi, u_noise, u_which, u_dir = rng.random(6)
        cite_scale = float(rng.lognormal(0.0, 0.2))
        cite_jitter = int(rng.integers(-1, 2))

        kinds = []
        year = record.pub_year
        author = _safe(normalize_author, record.first_author_surname, record.first_author_given)
        journal = _safe(normalize_journal, record.journal_name)
        doi = record.doi
        if u_alt < profile.p_alt_language_title:
            title = _alt_language_title(title, record.title_language, threshold)
            kinds.append(ALT_LANGUAGE)
        if u_err < profile.p_erratum_conflation:
            title = f"erratum to {title}"
            doi = f"10.99999/erratum.{_short_hash(record.record_id)}"
            kinds.append(ERRATUM)
        if u_doi < profile.p_missing_doi:
            if doi is not None:
                doi = None
                kinds.append(MISSING_DOI)
        elif u_doi < profile.p_missing_doi + profile.p_wrong_doi:
            doi = f"10.99999/wrong.{_short_hash(record.record_id)}"
            kinds.append(WRONG_DOI)
        if u_noise < profile.p_metadata_noise:
            which = NOISE_FIELDS[min(int(u_which * 3), 2)]
            if which == "year":
                year = year + (1 if u_dir < 0.5 else -1)
            elif which == "author":
                author = _perturb_author(author)
            else:
                journal = _perturb_journal(journal)
            kinds.append(f"noise_{which}")

        entity_id = position + 1
        scopus_cc = record.citation_count or 0
        index_cc = max(0, round(scopus_cc * cite_scale) + cite_jitter)
        documents.append(IndexedDocument(
            entity_id=entity_id, title=title, year=year, author=author,
            journal=journal, doi=doi, citation_count=index_cc,
        ))
        status = INDEXED_CORRUPTED if kinds else INDEXED_CLEAN
        ledger[record.record_id] = TruthEntry(record.record_id, status, tuple(kinds),
                                              str(entity_id))
    return MockIndex(documents, retrieval_threshold), ledger


def _short_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def _perturb_author(author: str | None) -> str:
    if author is None:
        return "x anonymous"
    words = author.split()
    if len(words) > 1 and len(words[0]) == 1:
        # drop the initial, keeping the surname
        return " ".join(words[1:])
    return "x " + author


def _perturb_journal(journal: str | None) -> str:
    if journal is None:
        return "unknown journal"
    words = journal.split()
    if len(words) > 1:
        return " ".join(words[1:])
    return journal + " letters"


def search_index(index: MockIndex, expr: str, count: int) -> list[CandidateResult]:
    """Evaluate a wire expression; parse errors propagate."""
    parsed = parse_query(expr)
    return [
        CandidateResult(str(d.entity_id), d.title, d.year, d.author, d.journal,
                        d.doi, d.citation_count)
        for d, _ in index.search(parsed, count)
    ]


def render_evaluate(index: MockIndex, expr: str, count: int,
                    attributes: Iterable[str] | None = None) -> dict:
    """The JSON body served for ``GET /evaluate``."""
    parsed = parse_query(expr)
    hits = index.search(parsed, count)
    return {"expr": expr,
            "entities": [d.to_entity(attributes) for d, _ in hits]}


_BLOCKING = {MISSING_JOURNAL_YEAR, "unindexable_title", ALT_LANGUAGE, ERRATUM,
             MISSING_DOI, WRONG_DOI}
_STRATEGY_FIELDS = {
    Strategy.TITLE_ONLY: set(),
    Strategy.YEAR_TITLE: {"noise_year"},
    Strategy.AUTHOR_TITLE: {"noise_author"},
    Strategy.JOURNAL_TITLE: {"noise_journal"},
    Strategy.FULL: {"noise_year", "noise_author", "noise_journal"},
}
_STRATEGY_PARTS = {
    Strategy.TITLE_ONLY: (),
    Strategy.YEAR_TITLE: (),
    Strategy.AUTHOR_TITLE: ("author",),
    Strategy.JOURNAL_TITLE: ("journal",),
    Strategy.FULL: ("author", "journal"),
}


def ledger_predicts_retrieval(record: BibRecord, entry: TruthEntry, strategy: Strategy) -> bool:
    """Whether the ledger says ``strategy`` plus DOI filtering finds ``record``.

    This reads only the ledger and the record's own fields, never the index.
    """
    strategy = Strategy(strategy)
    if entry.status == ABSENT or not record.doi:
        return False
    kinds = set(entry.kinds)
    if kinds & _BLOCKING or kinds & _STRATEGY_FIELDS[strategy]:
        return False
    for part in _STRATEGY_PARTS[strategy]:
        if part == "author" and _safe(normalize_author, record.first_author_surname,
                                      record.first_author_given) is None:
            return False
        if part == "journal" and _safe(normalize_journal, record.journal_name) is None:
            return False
    return True


def write_ledger(ledger: Mapping[str, TruthEntry], stream: IO[str]) -> None:
    for rid in sorted(ledger):
        stream.write(json.dumps(ledger[rid].to_dict(), sort_keys=True) + "\n")


def read_ledger(stream: IO[str]) -> dict[str, TruthEntry]:
    out = {}
    for line in stream:
        if line.strip():
            d = json.loads(line)
            out[d["record_id"]] = TruthEntry(d["record_id"], d["status"],
                                             tuple(d["kinds"]), d["entity_id"])
    return out
