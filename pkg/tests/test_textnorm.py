import unicodedata

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biblink.textnorm import (
    GREEK_NAMES,
    NormalizationError,
    fold_accents,
    normalize_author,
    normalize_doi,
    normalize_journal,
    normalize_title,
)

NORMALIZED_CHARS = set("abcdefghijklmnopqrstuvwxyz0123456789 ")


def _is_normalized(text: str) -> bool:
    return (set(text) <= NORMALIZED_CHARS and text == text.strip()
            and "  " not in text)


@pytest.mark.parametrize("raw, expected", [
    ("The O/OREOS mission: First science data from the space environment viability "
     "of organics (SEVO) payload",
     "the o oreos mission first science data from the space environment viability "
     "of organics sevo payload"),
    ("abc 123", "abc 123"),
    ("Previous prescription of β-blockers", "previous prescription of beta blockers"),
    ("H<sub>2</sub>O and CO<SUP>2</SUP>", "h2o and co2"),
    ("α-Fe<inf>2</inf>O<inf>3</inf>", "alpha fe2o3"),
    ("MIP-1β", "mip 1 beta"),
    ("Ångström naïve café", "angstrom naive cafe"),
    ("Straße Ærø Łódź", "strasse aero lodz"),
    ("a <b>bold</b> claim", "a b bold b claim"),
    ("ΣΟΦΙΑ ς", "sigma omicron phi iota alpha sigma"),
])
def test_normalize_title_examples(raw, expected):
    assert normalize_title(raw) == expected


@pytest.mark.parametrize("raw", ["", "   ", "<sup></sup>", "!!!", "\u2014"])
def test_normalize_title_vanished(raw):
    with pytest.raises(NormalizationError, match="vanished"):
        normalize_title(raw)


def test_greek_table_covers_full_alphabet():
    lower = [chr(c) for c in range(ord("α"), ord("ω") + 1) if chr(c) != "ς"]
    upper = [chr(c) for c in range(ord("Α"), ord("Ω") + 1) if c != 0x03A2]
    assert len(lower) == len(upper) == 24
    for ch in lower + upper + ["ς"]:
        assert ch in GREEK_NAMES
    assert GREEK_NAMES["ς"] == "sigma"
    assert GREEK_NAMES["α"] == "alpha" and GREEK_NAMES["Ω"] == "omega"


@pytest.mark.parametrize("surname, given, expected", [
    ("Jehlička", "J.", "j jehlicka"),
    ("smith", "j", "j smith"),
    ("O'Brien", "Patrick", "p o brien"),
    ("García-López", "Ana", "a garcia lopez"),
    ("Lin", "", "lin"),
    ("Nørgaard", "Søren", "s norgaard"),
    ("Rodríguez", "Élise", "e rodriguez"),
    ("Lin", "  .  ", "lin"),
])
def test_normalize_author_examples(surname, given, expected):
    assert normalize_author(surname, given) == expected


@pytest.mark.parametrize("surname", ["", " ", "'-'"])
def test_normalize_author_empty_surname(surname):
    with pytest.raises(NormalizationError):
        normalize_author(surname, "J.")


@pytest.mark.parametrize("raw, expected", [
    ("Agris On-line Papers in Economics and Informatics",
     "agris on line papers in economics and informatics"),
    ("biometrika", "biometrika"),
    ("Research & Practice", "research and practice"),
    ("Soil&Tillage Research", "soil and tillage research"),
    ("Zeitschrift für Kristallographie - New Crystal Structures",
     "zeitschrift fur kristallographie new crystal structures"),
])
def test_normalize_journal_examples(raw, expected):
    assert normalize_journal(raw) == expected


def test_normalize_journal_empty():
    with pytest.raises(NormalizationError):
        normalize_journal(" - ")


@pytest.mark.parametrize("raw, expected", [
    ("10.1000/ABC.", "10.1000/abc"),
    ("10.1000/abc", "10.1000/abc"),
    ("10.1000/x..", "10.1000/x"),
    ("  10.1000/X. . ", "10.1000/x"),
    ("10.1000/a.b", "10.1000/a.b"),
])
def test_normalize_doi_examples(raw, expected):
    assert normalize_doi(raw) == expected


@pytest.mark.parametrize("raw", ["", "...", " . "])
def test_normalize_doi_empty(raw):
    with pytest.raises(NormalizationError):
        normalize_doi(raw)


def _ok(fn, *args):
    try:
        return fn(*args)
    except NormalizationError:
        return None


@settings(max_examples=500, deadline=None)
@given(st.text())
def test_title_output_is_normalized_and_idempotent(raw):
    out = _ok(normalize_title, raw)
    if out is None:
        return
    assert _is_normalized(out) and out
    assert normalize_title(out) == out
    assert not any(unicodedata.combining(c) for c in out)


@settings(max_examples=300, deadline=None)
@given(st.text(), st.text())
def test_author_output_is_normalized_and_idempotent(surname, given_name):
    out = _ok(normalize_author, surname, given_name)
    if out is None:
        return
    assert _is_normalized(out)
    assert normalize_author(out) == out


@settings(max_examples=300, deadline=None)
@given(st.text())
def test_journal_output_is_normalized_and_idempotent(raw):
    out = _ok(normalize_journal, raw)
    if out is None:
        return
    assert _is_normalized(out)
    assert normalize_journal(out) == out


@settings(max_examples=300, deadline=None)
@given(st.text(min_size=1))
def test_doi_idempotent_and_dot_absorbing(raw):
    out = _ok(normalize_doi, raw)
    if out is None:
        return
    assert out == out.lower() and not out.endswith(".") and out
    assert normalize_doi(out) == out
    assert normalize_doi(out + ".") == out


LATIN = st.characters(min_codepoint=0x00C0, max_codepoint=0x024F)


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet=LATIN, min_size=1))
def test_accent_folding_leaves_no_combining_marks(raw):
    folded = fold_accents(raw)
    assert not any(unicodedata.combining(c) for c in folded)
