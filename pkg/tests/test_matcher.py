import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biblink.matcher import (
    CandidateResult,
    MatchDecision,
    MatchRules,
    doi_filter,
    field_differences,
    metadata_filter,
    title_word_overlap,
)

from conftest import make_record
from gen import oracle_metadata_filter, random_case


def cand(eid="e1", title="Designs of variable resolution", year=2012, author="c lin",
         journal="biometrika", doi=None, cc=0):
    return CandidateResult(eid, title, year, author, journal, doi, cc)


@pytest.mark.parametrize("a, b, expected", [
    ("a b c", "a b c", 1.0),
    ("a b", "c d", 0.0),
    ("a b c", "a b d", 0.5),
    ("a a b", "a b", 1.0),
])
def test_title_word_overlap(a, b, expected):
    assert title_word_overlap(a, b) == expected


def test_overlap_modes():
    assert title_word_overlap("a a b", "a b", "multiset") == pytest.approx(2 / 3)
    assert title_word_overlap("a b", "a b c d", "query_coverage") == 1.0
    with pytest.raises(ValueError):
        title_word_overlap("a", "a", "cosine")


def test_field_differences_examples():
    record = make_record()
    assert field_differences(record, cand()) == set()
    assert field_differences(record, cand(year=2013)) == {"year"}
    assert field_differences(record, cand(author=None, journal=None)) == {"author", "journal"}
    assert field_differences(record, cand(year=None)) == {"year"}
    assert field_differences(record, cand(title="Designs of variable resolutions")) == {"title"}


def test_author_matches_full_or_initial_form():
    record = make_record()
    assert field_differences(record, cand(author="Chen Lin")) == set()
    assert field_differences(record, cand(author="C. Lin")) == set()
    assert field_differences(record, cand(author="d lin")) == {"author"}


def test_doi_filter_examples():
    record = make_record(doi="10.1/ABC")
    assert doi_filter(record, [cand(doi="10.1/abc.")]).accepted
    empty = doi_filter(record, [])
    assert not empty.accepted and empty.reasons == ["no candidates"]
    two = doi_filter(record, [cand("e1", doi="10.1/x"), cand("e2", doi="10.1/abc")])
    assert two.candidate.entity_id == "e2"
    assert two.rejections == (("e1", ("doi mismatch",)),)
    none = doi_filter(record, [cand("e1"), cand("e2", doi="10.2/abc")])
    assert none.rejections == (("e1", ("no doi",)), ("e2", ("doi mismatch",)))


def test_doi_filter_requires_doi():
    with pytest.raises(ValueError, match="doi_filter requires a DOI"):
        doi_filter(make_record(doi=None), [cand()])


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="abc./19XY", min_size=1, max_size=8),
       st.booleans(), st.integers(0, 3), st.booleans(), st.integers(0, 3))
def test_doi_filter_case_and_dot_symmetric(suffix, up_r, dots_r, up_c, dots_c):
    base = "10.5/" + suffix.strip(".") + "z"

    def corrupt(doi, up, dots):
        return (doi.upper() if up else doi) + "." * dots

    record = make_record(doi=corrupt(base, up_r, dots_r))
    matching = [cand("e1", doi="10.5/other"), cand("e2", doi=corrupt(base, up_c, dots_c))]
    assert doi_filter(record, matching).candidate.entity_id == "e2"
    assert not doi_filter(record, matching[:1]).accepted


def test_metadata_filter_examples():
    record = make_record()
    identical = metadata_filter(record, [cand()])
    assert identical.accepted and identical.overlap == 1.0
    assert metadata_filter(record, [cand(year=2013)]).accepted
    two = metadata_filter(record, [cand(year=2013, author="x nobody")])
    assert not two.accepted and two.reasons == ["e1: 2 differences (author, year)"]
    # title differs (one allowed difference) and overlap 8/10 = 0.80 < 0.85
    record = make_record(title="a b c d e f g h")
    low = metadata_filter(record, [cand(title="a b c d e f g h i j")])
    assert not low.accepted
    assert low.reasons == ["e1: overlap below threshold (0.800)"]


def test_metadata_filter_reports_both_failures():
    record = make_record(title="a b c d e f g h")
    decision = metadata_filter(record, [cand(title="a b c", year=1999)])
    assert decision.rejections == (
        ("e1", ("2 differences (title, year)", "overlap below threshold (0.375)")),)


def test_metadata_filter_best_overlap_then_earliest():
    record = make_record(title="a b c d e f g h i j k l m n o p q r s t")
    words = record.title.split()
    near = " ".join(words[:-1])            # 19/20
    nearer = " ".join(words[:-1] + ["t"])  # 20/20 but unequal string order
    decision = metadata_filter(record, [cand("e1", title=near), cand("e2", title=nearer),
                                        cand("e3", title=nearer)])
    assert decision.candidate.entity_id == "e2" and decision.overlap == 1.0


def test_rules_validation():
    with pytest.raises(ValueError):
        MatchRules(title_overlap_min=1.5)
    with pytest.raises(ValueError):
        MatchRules(max_field_differences=-1)
    with pytest.raises(ValueError):
        MatchRules(overlap_mode="cosine")
    with pytest.raises(ValueError):
        CandidateResult("", "t")
    with pytest.raises(ValueError):
        CandidateResult("e", "t", citation_count=-1)


def test_reject_helper():
    assert MatchDecision.reject([]).reasons == ["no candidates"]


def _assert_agrees(record, candidates):
    decision = metadata_filter(record, candidates)
    index, overlap = oracle_metadata_filter(record, candidates)
    if index is None:
        assert not decision.accepted
        assert all(reasons for _, reasons in decision.rejections)
    else:
        assert decision.candidate is candidates[index]
        assert decision.overlap == pytest.approx(float(overlap), abs=1e-12)
        assert len(field_differences(record, decision.candidate)) <= 1


@settings(max_examples=500, deadline=None)
@given(st.integers(0, 2**32))
def test_metadata_filter_agrees_with_oracle(seed):
    _assert_agrees(*random_case(random.Random(seed)))


def test_oracle_cases_exercise_both_outcomes():
    rng = random.Random(5)
    outcomes = {oracle_metadata_filter(*random_case(rng))[0] is not None for _ in range(500)}
    assert outcomes == {True, False}
