"""Scanner, parser and validator for the single-block SELECT-FROM-WHERE dialect.

Grammar::

    query := SELECT proj FROM caps [WHERE preds]
    proj  := '*' | ident (',' ident)*
    caps  := ident (',' ident)*
    preds := pred (AND pred)*
    pred  := ident comp (ident | number | string)
    comp  := '=' | '<' | '>' | '<=' | '>=' | '<>'
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Mapping

from wsms.catalog import Catalog, ServiceSpec, map_services, select_service
from wsms.costmodel import DEFAULT_COST_MODEL, CostModel
from wsms.errors import LexError, QuerySyntaxError, ValidationError
from wsms.relation import Column, Predicate

KEYWORDS = frozenset({"SELECT", "FROM", "WHERE", "AND"})

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<comparator><=|>=|<>|=|<|>)
  | (?P<number>-?\d+)
  | (?P<word>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>'(?:[^']|'')*')
  | (?P<comma>,)
  | (?P<star>\*)
  | (?P<lparen>\()
  | (?P<rparen>\))
  | (?P<dot>\.)
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    position: int


@dataclass(frozen=True)
class Query:
    """Parsed query. ``projection`` is None for ``SELECT *``."""

    projection: tuple[str, ...] | None
    sources: tuple[str, ...]
    predicates: tuple[Predicate, ...] = ()


def tokenize(text: str) -> list[Token]:
    tokens = []
    i = 0
    offset = 0  # byte offset of text[i]
    while i < len(text):
        m = _TOKEN_RE.match(text, i)
        if m is None:
            if text[i] == "'":
                raise LexError("unterminated string literal", offset)
            raise LexError(f"illegal character {text[i]!r}", offset)
        kind = m.lastgroup
        lexeme = m.group()
        if kind != "ws":
            if kind == "word":
                upper = lexeme.upper()
                if upper in KEYWORDS:
                    tokens.append(Token("keyword", upper, offset))
                else:
                    tokens.append(Token("identifier", lexeme, offset))
            else:
                tokens.append(Token(kind, lexeme, offset))
        offset += len(lexeme.encode("utf-8"))
        i = m.end()
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def _peek(self) -> Token | None:
        return self.tokens[self.i] if self.i < len(self.tokens) else None

    def _end_position(self) -> int:
        if not self.tokens:
            return 0
        last = self.tokens[-1]
        return last.position + len(last.text.encode("utf-8"))

    def _error(self, expected: tuple[str, ...]):
        tok = self._peek()
        if tok is None:
            raise QuerySyntaxError("unexpected end of query", self._end_position(), expected)
        raise QuerySyntaxError(f"unexpected {tok.text!r}", tok.position, expected)

    def _expect(self, kind: str, text: str | None = None) -> Token:
        tok = self._peek()
        if tok is None or tok.kind != kind or (text is not None and tok.text != text):
            self._error((text or kind,))
        self.i += 1
        return tok

    def _accept(self, kind: str, text: str | None = None) -> Token | None:
        tok = self._peek()
        if tok is not None and tok.kind == kind and (text is None or tok.text == text):
            self.i += 1
            return tok
        return None

    def _ident_list(self) -> tuple[str, ...]:
        names = [self._expect("identifier").text]
        while self._accept("comma"):
            names.append(self._expect("identifier").text)
        return tuple(names)

    def _predicate(self) -> Predicate:
        lhs = self._expect("identifier").text
        op = self._expect("comparator").text
        tok = self._peek()
        if tok is not None and tok.kind == "identifier":
            rhs: Column | int | str = Column(tok.text)
        elif tok is not None and tok.kind == "number":
            rhs = int(tok.text)
        elif tok is not None and tok.kind == "string":
            rhs = tok.text[1:-1].replace("''", "'")
        else:
            self._error(("identifier", "number", "string"))
        self.i += 1
        return Predicate(lhs, op, rhs)

    def query(self) -> Query:
        self._expect("keyword", "SELECT")
        if self._accept("star"):
            projection = None
        else:
            tok = self._peek()
            if tok is None or tok.kind != "identifier":
                self._error(("*", "identifier"))
            projection = self._ident_list()
        self._expect("keyword", "FROM")
        sources = self._ident_list()
        predicates = []
        if self._accept("keyword", "WHERE"):
            predicates.append(self._predicate())
            while self._accept("keyword", "AND"):
                predicates.append(self._predicate())
        if self._peek() is not None:
            self._error(("end of query",) if predicates else ("WHERE", "end of query"))
        return Query(projection, sources, tuple(predicates))


def parse(tokens: list[Token]) -> Query:
    return _Parser(tokens).query()


def parse_query(text: str) -> Query:
    return parse(tokenize(text))


def render(ast: Query) -> str:
    proj = "*" if ast.projection is None else ", ".join(ast.projection)
    out = f"SELECT {proj} FROM {', '.join(ast.sources)}"
    if ast.predicates:
        out += " WHERE " + " AND ".join(str(p) for p in ast.predicates)
    return out


@dataclass(frozen=True)
class ValidatedQuery:
    ast: Query
    bindings: Mapping[str, ServiceSpec]
    producers: Mapping[str, tuple[str, ...]]
    columns: tuple[str, ...]

    @property
    def services(self) -> tuple[ServiceSpec, ...]:
        """Selected services in FROM order."""
        return tuple(self.bindings[cap] for cap in self.ast.sources)

    def producer(self, attr: str) -> str:
        return self.producers[attr][0]


def validate_query(ast: Query, c: Catalog, cm: CostModel = DEFAULT_COST_MODEL) -> ValidatedQuery:
    seen = set()
    for cap in ast.sources:
        if cap in seen:
            raise ValidationError(f"capability {cap!r} listed twice in FROM")
        seen.add(cap)
    candidates = map_services(c, ast.sources)
    bindings = {}
    for cap in ast.sources:
        if not candidates[cap]:
            raise ValidationError(f"unknown capability {cap!r}")
        bindings[cap] = select_service(candidates[cap], cm)
    chosen = [bindings[cap] for cap in ast.sources]

    producers: dict[str, list[str]] = {}
    for ws in chosen:
        for a in ws.output_attrs:
            producers.setdefault(a, []).append(ws.id)
    producers_t = {a: tuple(sorted(ids)) for a, ids in producers.items()}

    for ws in chosen:
        for a in ws.input_attrs:
            if not any(p != ws.id for p in producers_t.get(a, ())):
                raise ValidationError(
                    f"input {a!r} of service {ws.id!r} is not produced by any service in FROM"
                )

    def resolve(attr: str) -> str:
        ids = producers_t.get(attr)
        if not ids:
            raise ValidationError(f"unknown attribute {attr!r}")
        if len(ids) > 1:
            raise ValidationError(f"ambiguous attribute {attr!r} produced by {', '.join(ids)}")
        return ids[0]

    if ast.projection is None:
        columns = tuple(dict.fromkeys(a for ws in chosen for a in ws.output_attrs))
    else:
        for a in ast.projection:
            resolve(a)
        columns = tuple(dict.fromkeys(ast.projection))
        if len(columns) != len(ast.projection):
            raise ValidationError("attribute projected twice")
    for p in ast.predicates:
        owners = {resolve(a) for a in sorted(p.attrs)}
        if len(owners) > 1 and p.op != "=":
            raise ValidationError(f"join condition {p} must use '='")
    return ValidatedQuery(ast, bindings, producers_t, columns)
