"""Relations (multisets of tuples) and the comparison predicates evaluated over them."""

from __future__ import annotations

import operator
from collections import Counter
from dataclasses import dataclass
from typing import Any, Callable, Iterable, Mapping, Sequence, Union

from wsms.errors import ExecutionError, TypeMismatchError

Value = Union[int, str]

COMPARATORS: dict[str, Callable[[Any, Any], bool]] = {
    "=": operator.eq,
    "<>": operator.ne,
    "<": operator.lt,
    ">": operator.gt,
    "<=": operator.le,
    ">=": operator.ge,
}


def is_value(v: object) -> bool:
    # bool is an int subclass but not part of the value domain
    return isinstance(v, str) or (isinstance(v, int) and not isinstance(v, bool))


def compare(left: Value, op: str, right: Value) -> bool:
    if isinstance(left, str) != isinstance(right, str):
        raise TypeMismatchError(f"cannot compare {left!r} {op} {right!r}")
    return COMPARATORS[op](left, right)


@dataclass(frozen=True)
class Column:
    """Reference to an attribute on the right-hand side of a predicate."""

    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Predicate:
    lhs: str
    op: str
    rhs: Column | int | str

    def __post_init__(self):
        if self.op not in COMPARATORS:
            raise ValueError(f"unknown comparator {self.op!r}")

    @property
    def attrs(self) -> frozenset[str]:
        if isinstance(self.rhs, Column):
            return frozenset((self.lhs, self.rhs.name))
        return frozenset((self.lhs,))

    @property
    def is_join(self) -> bool:
        """True for attribute-to-attribute comparisons."""
        return isinstance(self.rhs, Column)

    def evaluate(self, row: Mapping[str, Value]) -> bool:
        right = row[self.rhs.name] if isinstance(self.rhs, Column) else self.rhs
        return compare(row[self.lhs], self.op, right)

    def __str__(self) -> str:
        if isinstance(self.rhs, str):
            rhs = "'" + self.rhs.replace("'", "''") + "'"
        else:
            rhs = str(self.rhs)
        return f"{self.lhs} {self.op} {rhs}"


@dataclass(frozen=True)
class Relation:
    """A multiset of tuples over an ordered schema.

    Rows are positional tuples aligned with ``schema``; duplicates are
    significant and row order carries no meaning.
    """

    schema: tuple[str, ...]
    rows: tuple[tuple[Value, ...], ...] = ()

    def __post_init__(self):
        if len(set(self.schema)) != len(self.schema):
            raise ExecutionError(f"duplicate attribute in schema {self.schema}")
        width = len(self.schema)
        for row in self.rows:
            if len(row) != width:
                raise ExecutionError(f"row {row} does not match schema {self.schema}")

    @classmethod
    def from_dicts(cls, schema: Sequence[str], rows: Iterable[Mapping[str, Value]]) -> Relation:
        schema = tuple(schema)
        return cls(schema, tuple(tuple(r[a] for a in schema) for r in rows))

    def dicts(self) -> list[dict[str, Value]]:
        return [dict(zip(self.schema, row)) for row in self.rows]

    def __len__(self) -> int:
        return len(self.rows)

    def index(self, attr: str) -> int:
        try:
            return self.schema.index(attr)
        except ValueError:
            raise ExecutionError(f"unknown attribute {attr!r} in {self.schema}") from None

    def multiset(self) -> Counter:
        return Counter(self.rows)

    def reorder(self, schema: Sequence[str]) -> Relation:
        """Same multiset with columns permuted into ``schema`` order."""
        schema = tuple(schema)
        if set(schema) != set(self.schema) or len(schema) != len(self.schema):
            raise ExecutionError(f"cannot reorder {self.schema} as {schema}")
        idx = [self.schema.index(a) for a in schema]
        return Relation(schema, tuple(tuple(row[i] for i in idx) for row in self.rows))

    def same_multiset(self, other: Relation) -> bool:
        """Multiset equality, ignoring column order."""
        if set(self.schema) != set(other.schema):
            return False
        return self.multiset() == other.reorder(self.schema).multiset()
