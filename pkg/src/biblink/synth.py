"""Seeded synthetic corpora for exercising the pipeline end to end.

Titles are built from a pseudo-word vocabulary and are guaranteed to have
pairwise distinct word sets. A share of titles, names and journals carry
accents, Greek letters, markup and punctuation so normalization is exercised.
"""

from __future__ import annotations

import numpy as np

from .corpus import BibRecord
from .textnorm import normalize_title

__all__ = ["COUNTRY_WEIGHTS", "generate_corpus", "synthetic_fields"]

# first-author countries weighted by their article counts in a 2012 sample
COUNTRY_WEIGHTS = {
    "United States": 29777, "China": 14270, "United Kingdom": 7496, "Germany": 5438,
    "Japan": 5106, "Canada": 4217, "France": 4177, "India": 4004, "Italy": 3658,
    "Spain": 3613, "Australia": 3610, "South Korea": 3297, "Brazil": 3139,
    "Netherlands": 2290, "Taiwan": 1964, "Iran": 1737, "Turkey": 1652,
    "Sweden": 1515, "Russian Federation": 1458, "Poland": 1234, "Switzerland": 1210,
    "Belgium": 1094, "Israel": 896, "Denmark": 859, "Norway": 792,
}
_COUNTRY_LANGUAGE = {
    "China": "zh", "Germany": "de", "Japan": "ja", "France": "fr", "Spain": "es",
    "Brazil": "pt", "Italy": "it", "Russian Federation": "ru", "Poland": "pl",
    "Turkey": "tr", "Iran": "fa",
}

_SYLLABLES = ("ba be bi bo bu ca ce ci co cu da de di do du fa fe fi fo ga ge "
              "gi go ka ke ki ko la le li lo lu ma me mi mo mu na ne ni no nu pa "
              "pe pi po ra re ri ro ru sa se si so su ta te ti to tu va ve vi vo "
              "za ze zi zo tra tri pro gen lin mor tal ver nor").split()
_CONNECTORS = ["of", "the", "and", "in", "for", "on", "with", "a"]
_DECORATIONS = ["β-", "α-", "γ ", "TNF-α ", "H<sub>2</sub>O ", "CO<sup>2</sup> ",
                "Ångström ", "naïve ", "café ", "Ø-"]
_SURNAMES = ["Smith", "Lin", "Jehlička", "O'Brien", "García-López", "Müller",
             "Nørgaard", "Dubois", "Kowalski", "Tanaka", "Silva", "Rossi",
             "Wang", "Li", "Novák", "Öztürk", "Ayllón Millán", "Şahin",
             "Van der Berg", "D'Angelo", "Zhang", "Kim", "Petrov", "Haddad"]
_GIVEN = ["J.", "C.", "Ana", "Zoë", "P", "Éric", "M.", "Łukasz", "Q.", "", "Siân", "T. K."]
_JOURNAL_PATTERNS = ["Journal of {t}", "{t} Research", "Revista de {t}",
                     "{t} & Practice", "Annals of {t}", "Zeitschrift für {t}",
                     "{t}: An International Journal", "Acta {t}"]


def synthetic_fields(n_fields: int) -> list[tuple[str, str]]:
    return [(f"{11 + i:02d}{(37 * i) % 89 + 10:02d}", f"Synthetic field {i + 1}")
            for i in range(n_fields)]


def _pick(rng: np.random.Generator, items):
    return items[int(rng.integers(len(items)))]


def _word(rng: np.random.Generator) -> str:
    return "".join(_pick(rng, _SYLLABLES) for _ in range(int(rng.integers(2, 4))))


def generate_corpus(
    n_records: int = 5000,
    n_fields: int = 10,
    seed: int = 0,
    doi_fraction: float = 1.0,
    journals_per_field: int = 6,
    dual_field_fraction: float = 0.05,
) -> list[BibRecord]:
    """Generate ``n_records`` records spread evenly over ``n_fields`` fields."""
    rng = np.random.Generator(np.random.PCG64(seed))
    fields = synthetic_fields(n_fields)
    vocab = sorted({_word(rng) for _ in range(6000)})
    topics = [_word(rng).capitalize() for _ in range(n_fields * journals_per_field)]
    journals = [
        [_JOURNAL_PATTERNS[(f * journals_per_field + j) % len(_JOURNAL_PATTERNS)].format(
            t=topics[f * journals_per_field + j]) for j in range(journals_per_field)]
        for f in range(n_fields)
    ]
    countries = list(COUNTRY_WEIGHTS)
    weights = np.array([COUNTRY_WEIGHTS[c] for c in countries], dtype=float)
    cumulative = np.cumsum(weights / weights.sum())
    cumulative[-1] = 1.0

    seen_titles: set[frozenset] = set()
    records = []
    for k in range(n_records):
        f = k % n_fields
        codes = {fields[f][0]}
        if rng.random() < dual_field_fraction:
            codes.add(fields[(f + 1) % n_fields][0])
        while True:
            n_words = int(rng.integers(6, 13))
            words = [_pick(rng, _CONNECTORS) if rng.random() < 0.25
                     else _pick(rng, vocab) for _ in range(n_words)]
            title = " ".join(words).capitalize()
            if rng.random() < 0.3:
                cut = int(rng.integers(2, n_words - 1))
                title = " ".join(words[:cut]).capitalize() + ": " + " ".join(words[cut:])
            if rng.random() < 0.1:
                title = _pick(rng, _DECORATIONS) + title
            key = frozenset(normalize_title(title).split())
            if key not in seen_titles:
                seen_titles.add(key)
                break

        country = None if rng.random() < 0.04 else countries[int(np.searchsorted(cumulative, rng.random(), side="right"))]
        language = _COUNTRY_LANGUAGE.get(country, "en") if rng.random() < 0.3 else "en"
        year = 2012 if rng.random() < 0.8 else _pick(rng, (2011, 2013))
        doi = None
        if rng.random() < doi_fraction:
            doi = f"10.{4000 + f}/syn.{year}.{k:06d}"
            if rng.random() < 0.2:
                doi = doi.upper()
            if rng.random() < 0.05:
                doi += "."
        records.append(BibRecord(
            record_id=f"R{k:06d}",
            title=title,
            first_author_surname=_pick(rng, _SURNAMES),
            first_author_given=_pick(rng, _GIVEN),
            journal_name=journals[f][int(rng.integers(journals_per_field))],
            pub_year=year,
            doi=doi,
            citation_count=int(rng.negative_binomial(1, 0.15)),
            field_codes=frozenset(codes),
            first_author_country=country,
            title_language=language,
        ))
    return records
