"""Syntax tree for PrivaLog programs.

All nodes are frozen dataclasses so that passes can share subtrees freely
and use nodes as dictionary keys.  Conjunctions and disjunctions are n-ary.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

ARITH_OPS = ("+", "-", "*", "/", "^")
ORDER_OPS = ("<", "=<", ">=", ">")
# `=:=` and `=/=` are arithmetic (in)equality; `=` and `is` unify or assign.
CMP_OPS = ("<", "=<", "=:=", "=/=", ">=", ">", "=", "is")
AGG_KINDS = ("min", "max", "sum", "count")
PTYPES = ("public", "private")
DTYPES = ("int", "float", "string")

HOLE = "_"


# --------------------------------------------------------------------- terms


@dataclass(frozen=True, slots=True)
class Var:
    name: str

    @property
    def is_hole(self) -> bool:
        return self.name == HOLE


@dataclass(frozen=True, slots=True)
class Const:
    value: int | float | str

    def __eq__(self, other: object) -> bool:
        # 1 and 1.0 must stay distinct constants: they have different types.
        return (
            isinstance(other, Const)
            and type(self.value) is type(other.value)
            and self.value == other.value
        )

    def __hash__(self) -> int:
        return hash((type(self.value).__name__, self.value))


@dataclass(frozen=True, slots=True)
class Param:
    """A client-supplied run-time argument, written `@name` in goals."""

    name: str


@dataclass(frozen=True, slots=True)
class BinOp:
    op: str
    left: "Term"
    right: "Term"


@dataclass(frozen=True, slots=True)
class Sqrt:
    arg: "Term"


Term = Union[Var, Const, Param, BinOp, Sqrt]


# ------------------------------------------------------------------ formulas


@dataclass(frozen=True, slots=True)
class Atom:
    pred: str
    args: tuple[Term, ...]

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True, slots=True)
class Cmp:
    op: str
    left: Term
    right: Term


@dataclass(frozen=True, slots=True)
class Not:
    arg: "Formula"


@dataclass(frozen=True, slots=True)
class And:
    items: tuple["Formula", ...]


@dataclass(frozen=True, slots=True)
class Or:
    items: tuple["Formula", ...]


@dataclass(frozen=True, slots=True)
class Truth:
    value: bool


TRUE = Truth(True)
FALSE = Truth(False)

Formula = Union[Atom, Cmp, Not, And, Or, Truth]


def conj(items: Iterable[Formula]) -> Formula:
    """Build a flat conjunction, dropping `true` and collapsing singletons."""
    flat: list[Formula] = []
    for item in items:
        if isinstance(item, And):
            flat.extend(item.items)
        elif item == TRUE:
            continue
        else:
            flat.append(item)
    if not flat:
        return TRUE
    if len(flat) == 1:
        return flat[0]
    return And(tuple(flat))


def disj(items: Iterable[Formula]) -> Formula:
    flat: list[Formula] = []
    for item in items:
        if isinstance(item, Or):
            flat.extend(item.items)
        else:
            flat.append(item)
    if not flat:
        return FALSE
    if len(flat) == 1:
        return flat[0]
    return Or(tuple(flat))


def conjuncts(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, And):
        return f.items
    if f == TRUE:
        return ()
    return (f,)


# ------------------------------------------------------------- declarations


@dataclass(frozen=True, slots=True)
class Column:
    name: str
    ptype: str
    dtype: str

    @property
    def private(self) -> bool:
        return self.ptype == "private"


@dataclass(frozen=True, slots=True)
class SchemaDecl:
    pred: str
    columns: tuple[Column, ...]
    primary_key: int | None = None

    @property
    def arity(self) -> int:
        return len(self.columns)


@dataclass(frozen=True, slots=True)
class Clause:
    head: Atom
    body: Formula = TRUE
    line: int = field(default=0, compare=False)


@dataclass(frozen=True, slots=True)
class Aggregation:
    kind: str
    over: str
    result: str


@dataclass(frozen=True, slots=True)
class Goal:
    """A single-atom query.

    `args` holds a `Var` for every output position (holes stay as `_`),
    and a `Const` or `Param` for every input position.
    """

    pred: str
    args: tuple[Term, ...]
    aggregation: Aggregation | None = None

    @property
    def input_positions(self) -> tuple[int, ...]:
        return tuple(i for i, a in enumerate(self.args) if not isinstance(a, Var))

    @property
    def inputs(self) -> tuple[tuple[int, Const | Param], ...]:
        return tuple((i, a) for i, a in enumerate(self.args) if not isinstance(a, Var))

    @property
    def answer_positions(self) -> tuple[int, ...]:
        """Positions that make up one answer tuple.

        Holes are projected away for plain queries; under an aggregation they
        are kept so that rows differing only in a hole are counted twice.
        """
        keep_holes = self.aggregation is not None
        return tuple(
            i
            for i, a in enumerate(self.args)
            if isinstance(a, Var) and (keep_holes or not a.is_hole)
        )

    @property
    def outputs(self) -> tuple[str, ...]:
        return tuple(
            a.name for a in self.args if isinstance(a, Var) and not a.is_hole
        )

    @property
    def pattern(self) -> str:
        return "".join("f" if isinstance(a, Var) else "b" for a in self.args)

    @property
    def params(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.args if isinstance(a, Param))


@dataclass(frozen=True, slots=True)
class Program:
    schemas: tuple[SchemaDecl, ...]
    clauses: tuple[Clause, ...]
    goal: Goal

    def schema(self, pred: str) -> SchemaDecl | None:
        for s in self.schemas:
            if s.pred == pred:
                return s
        return None

    @property
    def edb(self) -> frozenset[str]:
        return frozenset(s.pred for s in self.schemas)

    @property
    def idb(self) -> frozenset[str]:
        return frozenset(c.head.pred for c in self.clauses)

    def clauses_for(self, pred: str) -> tuple[Clause, ...]:
        return tuple(c for c in self.clauses if c.head.pred == pred)


# ------------------------------------------------------------------ helpers


def term_vars(t: Term) -> Iterator[str]:
    """Yield variable names of a term in left-to-right order (with repeats)."""
    if isinstance(t, Var):
        yield t.name
    elif isinstance(t, BinOp):
        yield from term_vars(t.left)
        yield from term_vars(t.right)
    elif isinstance(t, Sqrt):
        yield from term_vars(t.arg)


def formula_vars(f: Formula) -> Iterator[str]:
    if isinstance(f, Atom):
        for a in f.args:
            yield from term_vars(a)
    elif isinstance(f, Cmp):
        yield from term_vars(f.left)
        yield from term_vars(f.right)
    elif isinstance(f, Not):
        yield from formula_vars(f.arg)
    elif isinstance(f, (And, Or)):
        for item in f.items:
            yield from formula_vars(item)


def clause_vars(c: Clause) -> list[str]:
    """Distinct variable names, head first, in order of first occurrence."""
    seen: dict[str, None] = {}
    for name in formula_vars(c.head):
        seen.setdefault(name, None)
    for name in formula_vars(c.body):
        seen.setdefault(name, None)
    return list(seen)


def term_params(t: Term) -> Iterator[str]:
    if isinstance(t, Param):
        yield t.name
    elif isinstance(t, BinOp):
        yield from term_params(t.left)
        yield from term_params(t.right)
    elif isinstance(t, Sqrt):
        yield from term_params(t.arg)


def atoms_of(f: Formula) -> Iterator[Atom]:
    if isinstance(f, Atom):
        yield f
    elif isinstance(f, Not):
        yield from atoms_of(f.arg)
    elif isinstance(f, (And, Or)):
        for item in f.items:
            yield from atoms_of(item)


def subst_term(t: Term, env: dict[str, Term]) -> Term:
    if isinstance(t, Var):
        return env.get(t.name, t)
    if isinstance(t, BinOp):
        left = subst_term(t.left, env)
        right = subst_term(t.right, env)
        if left is t.left and right is t.right:
            return t
        return BinOp(t.op, left, right)
    if isinstance(t, Sqrt):
        arg = subst_term(t.arg, env)
        return t if arg is t.arg else Sqrt(arg)
    return t


def subst_formula(f: Formula, env: dict[str, Term]) -> Formula:
    if not env:
        return f
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(subst_term(a, env) for a in f.args))
    if isinstance(f, Cmp):
        return Cmp(f.op, subst_term(f.left, env), subst_term(f.right, env))
    if isinstance(f, Not):
        return Not(subst_formula(f.arg, env))
    if isinstance(f, And):
        return And(tuple(subst_formula(i, env) for i in f.items))
    if isinstance(f, Or):
        return Or(tuple(subst_formula(i, env) for i in f.items))
    return f


def subst_clause(c: Clause, env: dict[str, Term]) -> Clause:
    head = subst_formula(c.head, env)
    assert isinstance(head, Atom)
    return Clause(head, subst_formula(c.body, env), c.line)


class FreshNames:
    """Generate variable names that avoid a set of names already in use."""

    def __init__(self, used: Iterable[str] = (), prefix: str = "X_"):
        self.used = set(used)
        self.prefix = prefix
        self.counter = 0

    def __call__(self) -> str:
        while True:
            name = f"{self.prefix}{self.counter}"
            self.counter += 1
            if name not in self.used:
                self.used.add(name)
                return name

    def reserve(self, names: Iterable[str]) -> None:
        self.used.update(names)


def freshen_holes(c: Clause, fresh: FreshNames | None = None) -> Clause:
    """Replace every `_` in a clause by a distinct new variable."""
    if fresh is None:
        fresh = FreshNames(clause_vars(c), prefix="_H")

    def fix_term(t: Term) -> Term:
        if isinstance(t, Var) and t.is_hole:
            return Var(fresh())
        if isinstance(t, BinOp):
            return BinOp(t.op, fix_term(t.left), fix_term(t.right))
        if isinstance(t, Sqrt):
            return Sqrt(fix_term(t.arg))
        return t

    def fix(f: Formula) -> Formula:
        if isinstance(f, Atom):
            return Atom(f.pred, tuple(fix_term(a) for a in f.args))
        if isinstance(f, Cmp):
            return Cmp(f.op, fix_term(f.left), fix_term(f.right))
        if isinstance(f, Not):
            return Not(fix(f.arg))
        if isinstance(f, And):
            return And(tuple(fix(i) for i in f.items))
        if isinstance(f, Or):
            return Or(tuple(fix(i) for i in f.items))
        return f

    head = fix(c.head)
    assert isinstance(head, Atom)
    return Clause(head, fix(c.body), c.line)
