"""Index query expressions: AST, builder, serializer and parser.

Wire grammar::

    expr     := and | term
    and      := "And(" expr ("," expr)+ ")"
    term     := title | year | author | journal
    title    := "Ti='" text "'"
    year     := "Y=" digits
    author   := "Composite(AA.AuN='" text "')"
    journal  := "Composite(J.JN='" text "')"
    text     := word (" " word)*          word := [a-z0-9]+

No whitespace is allowed anywhere outside quoted text.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Union

from .corpus import BibRecord
from .textnorm import (
    NormalizationError,
    normalize_author,
    normalize_journal,
    normalize_title,
)

__all__ = [
    "And",
    "AuthorComposite",
    "JournalComposite",
    "QueryBuildError",
    "QueryExpr",
    "QuerySyntaxError",
    "Strategy",
    "TitleEquals",
    "UnknownAttributeError",
    "YearEquals",
    "build_query",
    "parse_query",
    "serialize_query",
]

_TEXT_RE = re.compile(r"[a-z0-9]+(?: [a-z0-9]+)*")


class QuerySyntaxError(ValueError):
    """Malformed wire expression. ``offset`` is the position of the fault."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


class UnknownAttributeError(QuerySyntaxError):
    pass


class QueryBuildError(ValueError):
    def __init__(self, part: str, message: str):
        super().__init__(f"{part}: {message}")
        self.part = part


def _check_text(value: str) -> None:
    if not isinstance(value, str) or not _TEXT_RE.fullmatch(value):
        raise ValueError(f"not a normalized text value: {value!r}")


@dataclass(frozen=True)
class TitleEquals:
    title: str

    def __post_init__(self):
        _check_text(self.title)


@dataclass(frozen=True)
class YearEquals:
    year: int

    def __post_init__(self):
        if isinstance(self.year, bool) or not isinstance(self.year, int) or self.year < 0:
            raise ValueError(f"invalid year: {self.year!r}")


@dataclass(frozen=True)
class AuthorComposite:
    name: str

    def __post_init__(self):
        _check_text(self.name)


@dataclass(frozen=True)
class JournalComposite:
    name: str

    def __post_init__(self):
        _check_text(self.name)


Term = Union[TitleEquals, YearEquals, AuthorComposite, JournalComposite]


@dataclass(frozen=True, init=False)
class And:
    operands: tuple[Term, ...]

    def __init__(self, *operands: Term):
        object.__setattr__(self, "operands", tuple(operands))
        if len(self.operands) < 2:
            raise ValueError("And needs at least two operands")
        kinds = set()
        for op in self.operands:
            if isinstance(op, And):
                raise ValueError("And may not nest directly inside And")
            if not isinstance(op, (TitleEquals, YearEquals, AuthorComposite, JournalComposite)):
                raise TypeError(f"not a query term: {op!r}")
            if type(op) in kinds:
                raise ValueError(f"duplicate {type(op).__name__} inside And")
            kinds.add(type(op))

    def term(self, kind: type) -> Term | None:
        return next((op for op in self.operands if isinstance(op, kind)), None)


QueryExpr = Union[Term, And]


class Strategy(str, enum.Enum):
    FULL = "full"
    AUTHOR_TITLE = "author_title"
    JOURNAL_TITLE = "journal_title"
    YEAR_TITLE = "year_title"
    TITLE_ONLY = "title"

    @property
    def label(self) -> str:
        return _STRATEGY_LABELS[self]


_STRATEGY_LABELS = {
    Strategy.FULL: "Full query",
    Strategy.AUTHOR_TITLE: "Author, title",
    Strategy.JOURNAL_TITLE: "Journal, title",
    Strategy.YEAR_TITLE: "Year, title",
    Strategy.TITLE_ONLY: "Title",
}


def _part(part: str, fn, *args) -> str:
    try:
        return fn(*args)
    except NormalizationError as exc:
        raise QueryBuildError(part, str(exc)) from exc


def build_query(record: BibRecord, strategy: Strategy) -> QueryExpr:
    """Build the query a strategy issues for ``record``."""
    strategy = Strategy(strategy)
    title = TitleEquals(_part("title", normalize_title, record.title))
    if strategy is Strategy.TITLE_ONLY:
        return title
    if strategy is Strategy.YEAR_TITLE:
        return And(title, YearEquals(record.pub_year))
    if strategy is Strategy.AUTHOR_TITLE:
        author = _part("author", normalize_author,
                       record.first_author_surname, record.first_author_given)
        return And(AuthorComposite(author), title)
    if strategy is Strategy.JOURNAL_TITLE:
        return And(JournalComposite(_part("journal", normalize_journal, record.journal_name)),
                   title)
    author = _part("author", normalize_author,
                   record.first_author_surname, record.first_author_given)
    journal = _part("journal", normalize_journal, record.journal_name)
    return And(AuthorComposite(author), JournalComposite(journal), title,
               YearEquals(record.pub_year))


def serialize_query(expr: QueryExpr) -> str:
    if isinstance(expr, TitleEquals):
        return f"Ti='{expr.title}'"
    if isinstance(expr, YearEquals):
        return f"Y={expr.year}"
    if isinstance(expr, AuthorComposite):
        return f"Composite(AA.AuN='{expr.name}')"
    if isinstance(expr, JournalComposite):
        return f"Composite(J.JN='{expr.name}')"
    if isinstance(expr, And):
        return "And(" + ",".join(serialize_query(op) for op in expr.operands) + ")"
    raise TypeError(f"not a query expression: {expr!r}")


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.pos = 0

    def fail(self, message: str, offset: int | None = None):
        raise QuerySyntaxError(message, self.pos if offset is None else offset)

    def startswith(self, token: str) -> bool:
        return self.text.startswith(token, self.pos)

    def expect(self, token: str) -> None:
        if not self.startswith(token):
            self.fail(f"expected {token!r}")
        self.pos += len(token)

    def quoted(self) -> str:
        self.expect("'")
        start = self.pos
        end = self.text.find("'", start)
        if end < 0:
            self.fail("unbalanced quote", start - 1)
        value = self.text[start:end]
        if not _TEXT_RE.fullmatch(value):
            bad = next((i for i, ch in enumerate(value)
                        if not ("a" <= ch <= "z" or "0" <= ch <= "9" or ch == " ")), None)
            self.fail("invalid quoted text", start + (bad if bad is not None else 0))
        self.pos = end + 1
        return value

    def attribute_name(self) -> str:
        m = re.compile(r"[A-Za-z][A-Za-z0-9.]*").match(self.text, self.pos)
        if not m:
            self.fail("expected attribute name")
        return m.group()

    def expr(self, nested: bool = False) -> QueryExpr:
        start = self.pos
        if self.startswith("And("):
            if nested:
                self.fail("And may not nest inside And")
            self.pos += 4
            operands = [self.expr(nested=True)]
            while self.startswith(","):
                self.pos += 1
                operands.append(self.expr(nested=True))
            if self.pos >= len(self.text):
                self.fail("unbalanced parenthesis", start + 3)
            self.expect(")")
            try:
                return And(*operands)
            except (ValueError, TypeError) as exc:
                self.fail(str(exc), start)
        if self.startswith("Ti="):
            self.pos += 3
            return TitleEquals(self.quoted())
        if self.startswith("Y="):
            self.pos += 2
            m = re.compile(r"[0-9]+").match(self.text, self.pos)
            if not m:
                self.fail("expected year digits")
            digits = m.group()
            if len(digits) > 1 and digits[0] == "0":
                self.fail("leading zero in year")
            self.pos = m.end()
            return YearEquals(int(digits))
        if self.startswith("Composite("):
            self.pos += len("Composite(")
            name_at = self.pos
            name = self.attribute_name()
            if name not in ("AA.AuN", "J.JN"):
                raise UnknownAttributeError(f"unknown attribute {name!r}", name_at)
            self.pos += len(name)
            self.expect("=")
            value = self.quoted()
            if self.pos >= len(self.text):
                self.fail("unbalanced parenthesis", start + len("Composite"))
            self.expect(")")
            return AuthorComposite(value) if name == "AA.AuN" else JournalComposite(value)
        if self.pos >= len(self.text):
            self.fail("unexpected end of expression")
        m = re.compile(r"[A-Za-z][A-Za-z0-9.]*(?==)").match(self.text, self.pos)
        if m:
            raise UnknownAttributeError(f"unknown attribute {m.group()!r}", self.pos)
        self.fail("expected query term")


def parse_query(wire: str) -> QueryExpr:
    """Parse a wire expression back into its AST.

    Raises :class:`QuerySyntaxError` (carrying the offending offset) on any
    deviation from the grammar, including trailing characters.
    """
    parser = _Parser(wire)
    expr = parser.expr()
    if parser.pos != len(wire):
        parser.fail("unexpected trailing input")
    return expr
