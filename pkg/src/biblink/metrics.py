"""Evaluation statistics: precision/recall, rank correlation, geometric means.

Undefined statistics are ``None`` throughout, never 0 or NaN.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

from .corpus import BibRecord
from .matcher import MatchDecision

__all__ = [
    "CountryRate",
    "FieldReport",
    "StrategyStats",
    "Summary",
    "country_match_rates",
    "field_precision_recall",
    "geometric_mean",
    "midranks",
    "pearson",
    "returned_precision",
    "spearman",
    "summarize_fields",
]


@dataclass(frozen=True)
class StrategyStats:
    recall: float
    precision: float | None
    n_accepted: int = 0
    n_correct: int = 0


@dataclass
class FieldReport:
    field_code: str
    field_name: str
    n_articles: int
    strategies: dict[str, StrategyStats] = field(default_factory=dict)
    scopus_geomean: float | None = None
    index_geomean: float | None = None
    spearman: float | None = None
    n_correlated: int = 0

    def __post_init__(self):
        if self.n_articles < 1:
            raise ValueError("n_articles must be >= 1")

    @property
    def geomean_difference(self) -> float | None:
        """Scopus minus index geometric mean."""
        if self.scopus_geomean is None or self.index_geomean is None:
            return None
        return self.scopus_geomean - self.index_geomean

    @property
    def geomean_difference_pct(self) -> float | None:
        """The difference as a percentage of the index geometric mean."""
        diff = self.geomean_difference
        if diff is None or not self.index_geomean:
            return None
        return 100.0 * diff / self.index_geomean


def field_precision_recall(
    decisions: Mapping[str, MatchDecision],
    truth: Mapping[str, bool],
) -> tuple[float | None, float]:
    """Return ``(precision, recall)`` for one field.

    ``truth[record_id]`` says whether the record's accepted candidate is the
    right article; it is ignored for rejected records.
    """
    if set(decisions) != set(truth):
        raise ValueError("decisions and truth cover different record sets")
    if not decisions:
        raise ValueError("no records")
    accepted = [rid for rid, d in decisions.items() if d.accepted]
    correct = sum(1 for rid in accepted if truth[rid])
    precision = correct / len(accepted) if accepted else None
    return precision, correct / len(decisions)


def returned_precision(n_correct: int, n_returned: int) -> float | None:
    """Share of all returned documents that are correct matches."""
    return n_correct / n_returned if n_returned else None


def midranks(values: Sequence[float]) -> list[float]:
    """1-based ranks with ties given the average of the ranks they span."""
    order = sorted(range(len(values)), key=values.__getitem__)
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        rank = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = rank
        i = j + 1
    return ranks


def pearson(x: Sequence[float], y: Sequence[float]) -> float | None:
    if len(x) != len(y):
        raise ValueError("x and y differ in length")
    n = len(x)
    if n < 2:
        return None
    mx = math.fsum(x) / n
    my = math.fsum(y) / n
    dx = [v - mx for v in x]
    dy = [v - my for v in y]
    sxx = math.fsum(d * d for d in dx)
    syy = math.fsum(d * d for d in dy)
    if sxx == 0 or syy == 0:
        return None
    r = math.fsum(a * b for a, b in zip(dx, dy)) / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def spearman(x: Sequence[float], y: Sequence[float]) -> float | None:
    """Spearman's rho as the Pearson correlation of midranks."""
    if len(x) != len(y):
        raise ValueError("x and y differ in length")
    if len(x) < 2 or len(set(x)) < 2 or len(set(y)) < 2:
        return None
    return pearson(midranks(x), midranks(y))


def geometric_mean(counts: Sequence[int]) -> float:
    """Offset geometric mean ``exp(mean(ln(1 + c))) - 1``."""
    if not counts:
        raise ValueError("geometric_mean of an empty sequence")
    if any(c < 0 for c in counts):
        raise ValueError("counts must be non-negative")
    return math.exp(math.fsum(math.log1p(c) for c in counts) / len(counts)) - 1.0


@dataclass(frozen=True)
class Summary:
    min: float
    max: float
    median: float
    mean: float
    n: int
    excluded: int = 0


def summarize_fields(
    reports: Iterable,
    selector: Callable[[object], float | None] = lambda v: v,
) -> Summary:
    """Min/max/median/mean of ``selector(report)`` over the defined values."""
    values = [selector(r) for r in reports]
    if not values:
        raise ValueError("nothing to summarize")
    defined = sorted(v for v in values if v is not None)
    if not defined:
        raise ValueError("every value is undefined")
    n = len(defined)
    mid = n // 2
    median = defined[mid] if n % 2 else (defined[mid - 1] + defined[mid]) / 2
    return Summary(defined[0], defined[-1], median, math.fsum(defined) / n, n,
                   len(values) - n)


@dataclass(frozen=True)
class CountryRate:
    country: str
    articles: int
    matches: int

    @property
    def rate(self) -> float:
        return self.matches / self.articles


def country_match_rates(
    records: Iterable[BibRecord],
    decisions: Mapping[str, MatchDecision],
) -> list[CountryRate]:
    """Match rate per first-author country, largest countries first."""
    totals: dict[str, list[int]] = {}
    for record in records:
        if record.record_id not in decisions:
            raise ValueError(f"no decision for record {record.record_id!r}")
        country = record.first_author_country or "unknown"
        entry = totals.setdefault(country, [0, 0])
        entry[0] += 1
        entry[1] += decisions[record.record_id].accepted
    rates = [CountryRate(c, a, m) for c, (a, m) in totals.items()]
    return sorted(rates, key=lambda r: (-r.articles, r.country))
