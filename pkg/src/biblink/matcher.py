"""Decide whether an index candidate is the same article as a source record."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Sequence

from .corpus import BibRecord
from .textnorm import (
    NormalizationError,
    normalize_author,
    normalize_author_string,
    normalize_doi,
    normalize_journal,
    normalize_title,
)

__all__ = [
    "CandidateResult",
    "MatchDecision",
    "MatchRules",
    "OVERLAP_MODES",
    "doi_filter",
    "doi_matches",
    "field_differences",
    "metadata_filter",
    "title_word_overlap",
]

OVERLAP_MODES = ("jaccard", "multiset", "query_coverage")


@dataclass(frozen=True)
class CandidateResult:
    entity_id: str
    title: str
    pub_year: int | None = None
    first_author: str | None = None
    journal_name: str | None = None
    doi: str | None = None
    citation_count: int = 0

    def __post_init__(self):
        if not self.entity_id:
            raise ValueError("empty entity_id")
        if self.citation_count < 0:
            raise ValueError("negative citation count")


@dataclass(frozen=True)
class MatchRules:
    max_field_differences: int = 1
    title_overlap_min: float = 0.85
    overlap_mode: str = "jaccard"

    def __post_init__(self):
        if not 0 <= self.title_overlap_min <= 1:
            raise ValueError("title_overlap_min must lie in [0, 1]")
        if self.max_field_differences < 0:
            raise ValueError("max_field_differences must be >= 0")
        if self.overlap_mode not in OVERLAP_MODES:
            raise ValueError(f"overlap_mode must be one of {OVERLAP_MODES}")


@dataclass(frozen=True)
class MatchDecision:
    """Outcome of filtering one record's candidates.

    ``candidate`` is set only for acceptances. ``rejections`` lists every
    rejected candidate as ``(entity_id, reasons)``; a rejection with no
    candidates at all carries the single entry ``("", ("no candidates",))``.
    """

    candidate: CandidateResult | None = None
    overlap: float | None = None
    rejections: tuple[tuple[str, tuple[str, ...]], ...] = field(default_factory=tuple)

    @property
    def accepted(self) -> bool:
        return self.candidate is not None

    @property
    def reasons(self) -> list[str]:
        return [f"{eid}: {r}" if eid else r for eid, rs in self.rejections for r in rs]

    @classmethod
    def reject(cls, rejections) -> MatchDecision:
        rejections = tuple(rejections) or (("", ("no candidates",)),)
        return cls(None, None, rejections)


def title_word_overlap(a: str, b: str, mode: str = "jaccard") -> float:
    """Word overlap of two normalized titles.

    ``jaccard`` is |A∩B| / |A∪B| over word sets. ``multiset`` does the same
    with word counts, and ``query_coverage`` is the share of ``a``'s distinct
    words found in ``b``.
    """
    if mode == "jaccard":
        wa, wb = set(a.split()), set(b.split())
        union = len(wa | wb)
        return len(wa & wb) / union if union else 0.0
    if mode == "multiset":
        ca, cb = Counter(a.split()), Counter(b.split())
        union = sum((ca | cb).values())
        return sum((ca & cb).values()) / union if union else 0.0
    if mode == "query_coverage":
        wa, wb = set(a.split()), set(b.split())
        return len(wa & wb) / len(wa) if wa else 0.0
    raise ValueError(f"unknown overlap mode {mode!r}")


def _safe(fn, *args) -> str | None:
    try:
        return fn(*args)
    except NormalizationError:
        return None


def _author_key(raw: str) -> tuple[str, ...]:
    """Both the full normalized form and its first-initial reduction."""
    norm = _safe(normalize_author_string, raw)
    if norm is None:
        return ()
    words = norm.split()
    if len(words) > 1:
        return (norm, " ".join([words[0][0], *words[1:]]))
    return (norm,)


def field_differences(record: BibRecord, candidate: CandidateResult) -> set[str]:
    """Fields on which ``candidate`` disagrees with ``record``.

    A field missing from the candidate counts as a difference. An index
    author given as a full name ("chen lin") also matches its initial form
    ("c lin").
    """
    diffs = set()
    rec_title = _safe(normalize_title, record.title)
    cand_title = _safe(normalize_title, candidate.title) if candidate.title else None
    if rec_title is None or rec_title != cand_title:
        diffs.add("title")
    if candidate.pub_year is None or candidate.pub_year != record.pub_year:
        diffs.add("year")
    rec_author = _safe(normalize_author, record.first_author_surname, record.first_author_given)
    if (rec_author is None or candidate.first_author is None
            or rec_author not in _author_key(candidate.first_author)):
        diffs.add("author")
    rec_journal = _safe(normalize_journal, record.journal_name)
    cand_journal = _safe(normalize_journal, candidate.journal_name) if candidate.journal_name else None
    if rec_journal is None or rec_journal != cand_journal:
        diffs.add("journal")
    return diffs


def doi_matches(record_doi: str, candidate_doi: str | None) -> bool:
    if not candidate_doi:
        return False
    cand = _safe(normalize_doi, candidate_doi)
    return cand is not None and cand == normalize_doi(record_doi)


def doi_filter(record: BibRecord, candidates: Sequence[CandidateResult]) -> MatchDecision:
    """Accept the first candidate whose normalized DOI equals the record's."""
    if not record.doi:
        raise ValueError("doi_filter requires a DOI")
    target = normalize_doi(record.doi)
    rejections = []
    for cand in candidates:
        cand_doi = _safe(normalize_doi, cand.doi) if cand.doi else None
        if cand_doi is None:
            rejections.append((cand.entity_id, ("no doi",)))
        elif cand_doi != target:
            rejections.append((cand.entity_id, ("doi mismatch",)))
        else:
            return MatchDecision(cand, None, tuple(rejections))
    return MatchDecision.reject(rejections)


def metadata_filter(
    record: BibRecord,
    candidates: Sequence[CandidateResult],
    rules: MatchRules = MatchRules(),
) -> MatchDecision:
    """Accept the best candidate that passes both metadata rules.

    A candidate is eligible when it differs from the record in at most
    ``rules.max_field_differences`` fields and its title overlap reaches
    ``rules.title_overlap_min``. The highest overlap wins; ties go to the
    earlier candidate.
    """
    rec_title = _safe(normalize_title, record.title)
    best: tuple[CandidateResult, float] | None = None
    rejections = []
    for cand in candidates:
        cand_title = _safe(normalize_title, cand.title) if cand.title else None
        if rec_title is None or cand_title is None:
            overlap = 0.0
        else:
            overlap = title_word_overlap(rec_title, cand_title, rules.overlap_mode)
        diffs = field_differences(record, cand)
        reasons = []
        if len(diffs) > rules.max_field_differences:
            reasons.append(f"{len(diffs)} differences ({', '.join(sorted(diffs))})")
        if overlap < rules.title_overlap_min:
            reasons.append(f"overlap below threshold ({overlap:.3f})")
        if reasons:
            rejections.append((cand.entity_id, tuple(reasons)))
        elif best is None or overlap > best[1]:
            best = (cand, overlap)
    if best is None:
        return MatchDecision.reject(rejections)
    return MatchDecision(best[0], best[1], tuple(rejections))
