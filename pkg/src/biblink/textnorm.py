"""Normalization of titles, author names, journal names and DOIs.

Normalized strings contain only ``[a-z0-9]`` words separated by single
spaces. They are what goes into index queries and what the matcher compares.
"""

from __future__ import annotations

import re
import unicodedata

__all__ = [
    "GREEK_NAMES",
    "FOLD_TABLE",
    "NormalizationError",
    "fold_accents",
    "normalize_author",
    "normalize_author_string",
    "normalize_doi",
    "normalize_journal",
    "normalize_title",
]


class NormalizationError(ValueError):
    """Raised when a value normalizes to the empty string."""

    def __init__(self, part: str, message: str):
        super().__init__(message)
        self.part = part


_GREEK_LETTERS = [
    ("alpha", "Αα"), ("beta", "Ββ"), ("gamma", "Γγ"), ("delta", "Δδ"),
    ("epsilon", "Εε"), ("zeta", "Ζζ"), ("eta", "Ηη"), ("theta", "Θθ"),
    ("iota", "Ιι"), ("kappa", "Κκ"), ("lambda", "Λλ"), ("mu", "Μμ"),
    ("nu", "Νν"), ("xi", "Ξξ"), ("omicron", "Οο"), ("pi", "Ππ"),
    ("rho", "Ρρ"), ("sigma", "Σσς"), ("tau", "Ττ"), ("upsilon", "Υυ"),
    ("phi", "Φφ"), ("chi", "Χχ"), ("psi", "Ψψ"), ("omega", "Ωω"),
]

#: Every Greek letter (both cases, final sigma, and the symbol variants that
#: NFKD does not fold) mapped to its English name.
GREEK_NAMES: dict[str, str] = {
    ch: name for name, chars in _GREEK_LETTERS for ch in chars
}
GREEK_NAMES.update({"ϐ": "beta", "ϑ": "theta", "ϕ": "phi", "ϖ": "pi",
                    "ϰ": "kappa", "ϱ": "rho", "ϲ": "sigma", "ϵ": "epsilon",
                    "ϒ": "upsilon"})

#: Latin letters with no canonical decomposition.
FOLD_TABLE: dict[str, str] = {
    "ø": "o", "Ø": "O", "ß": "ss", "ẞ": "SS", "æ": "ae", "Æ": "AE",
    "œ": "oe", "Œ": "OE", "ł": "l", "Ł": "L", "đ": "d", "Đ": "D",
    "ð": "d", "Ð": "D", "þ": "th", "Þ": "TH", "ı": "i", "ħ": "h",
    "Ħ": "H", "ŋ": "n", "Ŋ": "N", "ŧ": "t", "Ŧ": "T", "ĸ": "k",
}

_GREEK_RE = re.compile("[" + "".join(sorted(GREEK_NAMES)) + "]")
_MARKUP_RE = re.compile(r"<\s*/?\s*(?:sup|sub|inf)\s*/?\s*>", re.IGNORECASE)
_NON_ALNUM_RE = re.compile(r"[^a-z0-9]+")
_FOLD_TRANS = str.maketrans(FOLD_TABLE)
_DOI_TAIL_RE = re.compile(r"[.\s]+$")


def fold_accents(text: str) -> str:
    """Compatibility-decompose ``text`` and drop every combining mark."""
    decomposed = unicodedata.normalize("NFKD", text)
    stripped = "".join(ch for ch in decomposed if not unicodedata.combining(ch))
    return stripped.translate(_FOLD_TRANS)


def _squash(text: str) -> str:
    return _NON_ALNUM_RE.sub(" ", text.lower()).strip()


def _greek_to_words(text: str) -> str:
    return _GREEK_RE.sub(lambda m: f" {GREEK_NAMES[m.group()]} ", text)


def normalize_title(raw: str) -> str:
    """Normalize an article title.

    Sub/superscript tags are dropped, Greek letters become their English
    names, accents are folded, and anything that is not a lowercase ASCII
    letter or digit becomes a word break.

    >>> normalize_title("Previous prescription of β-blockers")
    'previous prescription of beta blockers'
    """
    text = _MARKUP_RE.sub("", raw)
    # NFKD first so that accented Greek (e.g. "ά") reaches the Greek table
    text = unicodedata.normalize("NFKD", text)
    text = _greek_to_words(text)
    result = _squash(fold_accents(text))
    if not result:
        raise NormalizationError("title", f"title vanished: {raw!r}")
    return result


def normalize_author(surname: str, given: str = "") -> str:
    """Return ``"<initial> <surname>"`` in normalized form.

    Only the first letter of ``given`` is kept, so "J.", "J" and "Jan" all
    give the same initial.
    """
    norm_surname = _squash(fold_accents(_greek_to_words(surname or "")))
    if not norm_surname:
        raise NormalizationError("author", f"empty author surname: {surname!r}")
    folded_given = fold_accents(given or "").lower()
    initial = next((ch for ch in folded_given if "a" <= ch <= "z"), "")
    return f"{initial} {norm_surname}" if initial else norm_surname


def normalize_author_string(raw: str) -> str:
    """Normalize a single-string author name as returned by an index."""
    result = _squash(fold_accents(_greek_to_words(raw or "")))
    if not result:
        raise NormalizationError("author", f"empty author name: {raw!r}")
    return result


def normalize_journal(raw: str) -> str:
    text = fold_accents(raw or "").replace("&", " and ")
    result = _squash(text)
    if not result:
        raise NormalizationError("journal", f"journal name vanished: {raw!r}")
    return result


def normalize_doi(raw: str) -> str:
    """Lowercase a DOI and strip trailing dots."""
    result = _DOI_TAIL_RE.sub("", (raw or "").strip().lower())
    if not result:
        raise NormalizationError("doi", f"empty DOI: {raw!r}")
    return result
