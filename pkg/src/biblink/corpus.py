"""Bibliographic records: data model, ingestion and per-field sampling.

Records are read from CSV (header row) or JSONL with these columns::

    record_id,title,first_author_surname,first_author_given,journal,year,
    doi,citations,field_codes,country,language

``field_codes`` is semicolon separated in CSV and may be a list in JSONL.
An optional ``other_authors`` column keeps the remaining author list as
opaque text. Sampling uses numpy's PCG64 generator.
"""

from __future__ import annotations

import csv
import io
import json
import logging
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Iterator, NamedTuple, Sequence

import numpy as np

__all__ = [
    "COLUMNS",
    "BibRecord",
    "FieldSample",
    "IngestError",
    "IngestResult",
    "InvalidRecordError",
    "Reject",
    "filter_min_field_size",
    "ingest_records",
    "record_to_row",
    "sample_per_field",
    "write_records",
    "write_rejects",
]

logger = logging.getLogger(__name__)

COLUMNS = (
    "record_id", "title", "first_author_surname", "first_author_given",
    "journal", "year", "doi", "citations", "field_codes", "country", "language",
)
OPTIONAL_COLUMNS = ("other_authors",)
REQUIRED_COLUMNS = ("record_id", "title", "year", "field_codes")

MIN_YEAR, MAX_YEAR = 1500, 2100


class InvalidRecordError(ValueError):
    """A record violates one of the :class:`BibRecord` invariants."""


class IngestError(Exception):
    pass


@dataclass(frozen=True)
class BibRecord:
    record_id: str
    title: str
    first_author_surname: str
    first_author_given: str
    journal_name: str
    pub_year: int
    doi: str | None = None
    citation_count: int | None = None
    field_codes: frozenset[str] = field(default_factory=frozenset)
    first_author_country: str | None = None
    title_language: str | None = None
    other_authors: str = ""

    def __post_init__(self):
        object.__setattr__(self, "field_codes", frozenset(self.field_codes))
        if not self.record_id:
            raise InvalidRecordError("empty record_id")
        if not self.title or not self.title.strip():
            raise InvalidRecordError("empty title")
        if isinstance(self.pub_year, bool) or not isinstance(self.pub_year, int):
            raise InvalidRecordError("invalid year")
        if not MIN_YEAR <= self.pub_year <= MAX_YEAR:
            raise InvalidRecordError("year out of range")
        if self.doi is not None and (not self.doi.strip() or "/" not in self.doi):
            raise InvalidRecordError("malformed doi")
        if self.citation_count is not None and self.citation_count < 0:
            raise InvalidRecordError("negative citation count")
        if not self.field_codes:
            raise InvalidRecordError("no field codes")


@dataclass(frozen=True)
class FieldSample:
    field_code: str
    field_name: str
    records: tuple[BibRecord, ...]

    def __len__(self) -> int:
        return len(self.records)


class Reject(NamedTuple):
    record_id: str
    reason: str


class IngestResult(NamedTuple):
    records: list[BibRecord]
    rejects: list[Reject]


def _blank(value) -> bool:
    return value is None or (isinstance(value, str) and not value.strip())


def _row_to_record(row: dict) -> BibRecord:
    def text(key: str) -> str:
        value = row.get(key)
        return "" if value is None else str(value).strip()

    year_raw = row.get("year")
    try:
        year = int(str(year_raw).strip())
    except (TypeError, ValueError):
        raise InvalidRecordError("invalid year") from None

    citations = None
    if not _blank(row.get("citations")):
        try:
            citations = int(str(row["citations"]).strip())
        except ValueError:
            raise InvalidRecordError("invalid citation count") from None

    codes = row.get("field_codes")
    if isinstance(codes, str):
        codes = [c.strip() for c in codes.split(";")]
    elif codes is None:
        codes = []
    codes = frozenset(str(c).strip() for c in codes if str(c).strip())

    return BibRecord(
        record_id=text("record_id"),
        title=text("title"),
        first_author_surname=text("first_author_surname"),
        first_author_given=text("first_author_given"),
        journal_name=text("journal"),
        pub_year=year,
        doi=None if _blank(row.get("doi")) else text("doi"),
        citation_count=citations,
        field_codes=codes,
        first_author_country=None if _blank(row.get("country")) else text("country"),
        title_language=None if _blank(row.get("language")) else text("language"),
        other_authors=text("other_authors"),
    )


def _check_columns(columns: Iterable[str]) -> None:
    columns = list(columns)
    unknown = [c for c in columns if c not in COLUMNS and c not in OPTIONAL_COLUMNS]
    if unknown:
        raise IngestError(f"unknown column(s): {', '.join(unknown)}")
    missing = [c for c in REQUIRED_COLUMNS if c not in columns]
    if missing:
        raise IngestError(f"missing required column(s): {', '.join(missing)}")


def _csv_rows(text: str) -> Iterator[dict]:
    reader = csv.DictReader(io.StringIO(text, newline=""))
    if reader.fieldnames is None:
        return
    _check_columns(reader.fieldnames)
    for row in reader:
        if None in row:
            raise IngestError(f"row {reader.line_num} has more values than columns")
        yield row


def _jsonl_rows(text: str) -> Iterator[dict]:
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        try:
            row = json.loads(line)
        except json.JSONDecodeError as exc:
            raise IngestError(f"line {lineno}: invalid JSON ({exc.msg})") from exc
        if not isinstance(row, dict):
            raise IngestError(f"line {lineno}: expected a JSON object")
        _check_columns([*row.keys(), *REQUIRED_COLUMNS])
        yield row


def ingest_records(source: IO[bytes] | bytes, format: str) -> IngestResult:
    """Parse records from a CSV or JSONL byte stream.

    Rows that violate a record invariant are returned in ``rejects`` with the
    reason. Structural problems (bad encoding, unknown columns, duplicate
    record ids) raise :class:`IngestError`.
    """
    try:
        raw = source if isinstance(source, bytes) else source.read()
        text = raw.decode("utf-8-sig")
    except (OSError, UnicodeDecodeError) as exc:
        raise IngestError(f"unreadable input: {exc}") from exc

    if format == "csv":
        rows = _csv_rows(text)
    elif format == "jsonl":
        rows = _jsonl_rows(text)
    else:
        raise IngestError(f"unknown format {format!r}")

    records: list[BibRecord] = []
    rejects: list[Reject] = []
    seen: dict[str, int] = {}
    for row in rows:
        rid = "" if row.get("record_id") is None else str(row.get("record_id")).strip()
        seen[rid] = seen.get(rid, 0) + 1
        try:
            records.append(_row_to_record(row))
        except InvalidRecordError as exc:
            rejects.append(Reject(rid, str(exc)))

    duplicates = sorted(rid for rid, n in seen.items() if n > 1 and rid)
    if duplicates:
        raise IngestError(f"duplicate record_id(s): {', '.join(duplicates)}")
    return IngestResult(records, rejects)


def record_to_row(record: BibRecord) -> dict:
    """Inverse of ingestion: a JSON-ready row using the file column names."""
    data = asdict(record)
    return {
        "record_id": data["record_id"],
        "title": data["title"],
        "first_author_surname": data["first_author_surname"],
        "first_author_given": data["first_author_given"],
        "journal": data["journal_name"],
        "year": data["pub_year"],
        "doi": data["doi"],
        "citations": data["citation_count"],
        "field_codes": sorted(data["field_codes"]),
        "country": data["first_author_country"],
        "language": data["title_language"],
        "other_authors": data["other_authors"],
    }


def write_records(records: Iterable[BibRecord], stream: IO[str], format: str = "jsonl") -> None:
    if format == "jsonl":
        for record in records:
            stream.write(json.dumps(record_to_row(record), ensure_ascii=False, sort_keys=True) + "\n")
        return
    writer = csv.DictWriter(stream, fieldnames=[*COLUMNS, *OPTIONAL_COLUMNS], lineterminator="\n")
    writer.writeheader()
    for record in records:
        row = record_to_row(record)
        row["field_codes"] = ";".join(row["field_codes"])
        writer.writerow({k: "" if v is None else v for k, v in row.items()})


def write_rejects(rejects: Iterable[Reject], stream: IO[str]) -> None:
    for reject in rejects:
        stream.write(json.dumps(reject._asdict(), ensure_ascii=False) + "\n")


def sample_per_field(
    records: Sequence[BibRecord],
    field_code: str,
    n: int,
    seed: int,
    field_name: str | None = None,
    population_cap: int | None = None,
) -> FieldSample:
    """Draw ``min(n, population)`` distinct records of one field.

    ``population_cap`` keeps only the last ``cap`` matching records (in input
    order) before sampling.
    """
    if n < 1:
        raise ValueError("n must be positive")
    population = [r for r in records if field_code in r.field_codes]
    if not population:
        raise ValueError(f"no records carry field code {field_code!r}")
    if population_cap is not None:
        population = population[-population_cap:]
    k = min(n, len(population))
    rng = np.random.Generator(np.random.PCG64(seed & (2**64 - 1)))
    picks = rng.choice(len(population), size=k, replace=False)
    return FieldSample(field_code, field_name or field_code,
                       tuple(population[int(i)] for i in picks))


def filter_min_field_size(samples: Iterable[FieldSample], min_size: int) -> list[FieldSample]:
    kept = []
    for sample in samples:
        if len(sample.records) >= min_size:
            kept.append(sample)
        else:
            logger.info("removing field %s: %d records < %d",
                        sample.field_code, len(sample.records), min_size)
    return kept
