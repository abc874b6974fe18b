import csv
import sys
from importlib import resources
from pathlib import Path

import pytest

from biblink.corpus import BibRecord, ingest_records

DATA = Path(__file__).parent / "data"

CLEAN_PROFILE = {"seed": 0}
SEEDED_PROFILE = {
    "p_missing_journal_year": 0.05,
    "p_alt_language_title": 0.03,
    "p_wrong_doi": 0.02,
    "p_missing_doi": 0.02,
    "p_metadata_noise": 0.05,
    "seed": 7,
}


def make_record(**overrides) -> BibRecord:
    values = dict(
        record_id="r1",
        title="Designs of variable resolution",
        first_author_surname="Lin",
        first_author_given="C.",
        journal_name="Biometrika",
        pub_year=2012,
        doi="10.1093/biomet/ass013",
        citation_count=3,
        field_codes=frozenset({"2613"}),
    )
    values.update(overrides)
    return BibRecord(**values)


def fixture_bytes() -> bytes:
    return resources.files("biblink").joinpath("data/fixture_records.csv").read_bytes()


@pytest.fixture(scope="session")
def fixture_records():
    return ingest_records(fixture_bytes(), "csv").records


@pytest.fixture(scope="session")
def country_rows():
    with open(DATA / "country_match_rates_2012.csv", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def pytest_terminal_summary(terminalreporter):
    module = sys.modules.get("test_acceptance")
    lines = getattr(module, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda l: int(l.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
