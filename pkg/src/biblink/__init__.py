"""Record linkage of bibliographic metadata against an academic search index."""

from .corpus import BibRecord, FieldSample, ingest_records, sample_per_field
from .matcher import CandidateResult, MatchDecision, MatchRules, doi_filter, metadata_filter
from .queryexpr import Strategy, build_query, parse_query, serialize_query
from .textnorm import normalize_author, normalize_doi, normalize_journal, normalize_title

__version__ = "0.1.0"

__all__ = [
    "BibRecord",
    "CandidateResult",
    "FieldSample",
    "MatchDecision",
    "MatchRules",
    "Strategy",
    "build_query",
    "doi_filter",
    "ingest_records",
    "metadata_filter",
    "normalize_author",
    "normalize_doi",
    "normalize_journal",
    "normalize_title",
    "parse_query",
    "sample_per_field",
    "serialize_query",
]
