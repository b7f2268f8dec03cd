"""Relations (typed sets of tuples) and databases of named relations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping

from .ast import Column, SchemaDecl
from .errors import DataError
from .interp import canonical_row


def _cell(v, col: Column, table: str):
    """Check a value against its column type; ints are widened in float columns."""
    if col.dtype == "string":
        ok = isinstance(v, str)
    elif isinstance(v, bool):
        ok = False
    elif col.dtype == "int":
        ok = isinstance(v, int)
    else:
        ok = isinstance(v, (int, float))
        v = float(v) if ok else v
    if not ok:
        raise DataError(f"{table}.{col.name}: {v!r} is not a {col.dtype}")
    return v


@dataclass(frozen=True)
class Relation:
    """A named relation: ordered, typed, privacy-labelled columns and distinct rows.

    Row order is kept (first occurrence wins when collapsing duplicates) so
    that the simulator's getTable is deterministic; semantically the rows
    form a set.
    """

    name: str
    columns: tuple[Column, ...]
    rows: tuple[tuple, ...]
    primary_key: int | None = None

    @classmethod
    def build(cls, name: str, columns: Iterable[Column], rows: Iterable[Iterable],
              primary_key: int | None = None) -> "Relation":
        cols = tuple(columns)
        seen: set[tuple] = set()
        kept: list[tuple] = []
        for r in rows:
            t = tuple(r)
            if len(t) != len(cols):
                raise ValueError(f"row {t!r} has arity {len(t)}, relation {name} has {len(cols)}")
            c = canonical_row(tuple(_cell(v, col, name) for v, col in zip(t, cols)))
            if c in seen:
                continue
            seen.add(c)
            kept.append(c)
        return cls(name, cols, tuple(kept), primary_key)

    @classmethod
    def from_schema(cls, schema: SchemaDecl, rows: Iterable[Iterable]) -> "Relation":
        return cls.build(schema.pred, schema.columns, rows, schema.primary_key)

    @property
    def arity(self) -> int:
        return len(self.columns)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self) -> Iterator[tuple]:
        return iter(self.rows)

    def column(self, i: int) -> list:
        return [r[i] for r in self.rows]

    def as_set(self) -> frozenset[tuple]:
        return frozenset(self.rows)

    def key_violations(self) -> list:
        """Key values that occur in more than one row (empty if no key)."""
        if self.primary_key is None:
            return []
        counts: dict = {}
        for r in self.rows:
            counts[r[self.primary_key]] = counts.get(r[self.primary_key], 0) + 1
        return [k for k, n in counts.items() if n > 1]


class Database(Mapping[str, Relation]):
    """Immutable mapping from table name to relation."""

    def __init__(self, relations: Iterable[Relation] | Mapping[str, Relation] = ()):
        if isinstance(relations, Mapping):
            relations = relations.values()
        self._rels = {r.name: r for r in relations}

    def __getitem__(self, name: str) -> Relation:
        return self._rels[name]

    def __iter__(self) -> Iterator[str]:
        return iter(self._rels)

    def __len__(self) -> int:
        return len(self._rels)

    def __repr__(self) -> str:
        sizes = ", ".join(f"{k}:{len(v)}" for k, v in self._rels.items())
        return f"Database({sizes})"

    def strings(self) -> set[str]:
        out: set[str] = set()
        for rel in self._rels.values():
            for i, c in enumerate(rel.columns):
                if c.dtype == "string":
                    out.update(r[i] for r in rel.rows)
        return out

    def with_relation(self, rel: Relation) -> "Database":
        rels = dict(self._rels)
        rels[rel.name] = rel
        return Database(rels)

    @classmethod
    def from_rows(cls, schemas: Iterable[SchemaDecl], rows: Mapping[str, Iterable]) -> "Database":
        """Convenience constructor: missing tables become empty relations."""
        return cls(Relation.from_schema(s, rows.get(s.pred, ())) for s in schemas)
