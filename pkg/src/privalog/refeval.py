"""Reference evaluator: relational semantics by bounded naive iteration.

This is the oracle the compiled pipeline is checked against, so it is
written to be obviously correct rather than fast.

Evaluation is demand driven.  A *table* is identified by a predicate, a
binding pattern and the values of the bound arguments; the goal demands one
table, and evaluating a clause may demand more.  Round i of a table is
computed from round i-1 of the tables it calls (naive evaluation), with
EDB relations available from the start and round 0 empty, so after m
rounds a table holds exactly the facts derivable by proof trees of height
at most m.  Rounds are memoised per table, so only demanded tables are
ever computed.

Within a clause body, literals run in a data-driven order: the leftmost
literal that can run with the current bindings goes next.  Conjunction is
intersection in the relational semantics, so the order only matters for
termination, not for the answer.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import chain
from typing import Callable, Iterable, Iterator, Mapping

from . import interp
from .ast import (
    HOLE,
    And,
    Atom,
    BinOp,
    Clause,
    Cmp,
    Const,
    Formula,
    Goal,
    Not,
    Or,
    Param,
    Program,
    Sqrt,
    Term,
    Truth,
    Var,
    atoms_of,
    clause_vars,
    formula_vars,
    freshen_holes,
    term_vars,
)
from .errors import EvaluationError
from .interp import EmptyAggregate, OperandTypeError, Value, canonical_row
from .relation import Database, Relation

DEFAULT_MAX_ITER = 10

Binding = dict[str, Value]


class NotRangeRestricted(EvaluationError):
    """A clause cannot be evaluated because some variable is never bound."""


# ------------------------------------------------------------------ terms


def eval_term(t: Term, row: Mapping[str, Value]) -> Value:
    """Value of a term under a binding of its variables."""
    if isinstance(t, Const):
        return t.value
    if isinstance(t, Var):
        try:
            return row[t.name]
        except KeyError:
            raise EvaluationError(f"variable {t.name} is unbound") from None
    if isinstance(t, BinOp):
        return interp.ARITH[t.op](eval_term(t.left, row), eval_term(t.right, row))
    if isinstance(t, Sqrt):
        return interp.sqrt(eval_term(t.arg, row))
    if isinstance(t, Param):
        try:
            return row["@" + t.name]
        except KeyError:
            raise EvaluationError(f"missing client argument @{t.name}") from None
    raise TypeError(f"not a term: {t!r}")


def _ground(t: Term, b: Mapping[str, Value]) -> bool:
    return all(v in b for v in term_vars(t))


# ---------------------------------------------------------------- clauses

TableKey = tuple[str, str, tuple]
Lookup = Callable[[str, str, tuple], Iterable[tuple]]


@dataclass
class _PreparedClause:
    clause: Clause
    literals: tuple[Formula, ...]
    # for each Not literal (by id), variables that occur nowhere else
    local_vars: dict[int, frozenset[str]] = field(default_factory=dict)


def _flatten(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        out: list[Formula] = []
        for i in f.items:
            out.extend(_flatten(i))
        return out
    if f == Truth(True):
        return []
    return [f]


def prepare_clause(c: Clause) -> _PreparedClause:
    c = freshen_holes(c)
    lits = tuple(_flatten(c.body))
    counts: dict[str, int] = {}
    for v in formula_vars(c.head):
        counts[v] = counts.get(v, 0) + 1
    for lit in lits:
        for v in set(formula_vars(lit)):
            counts[v] = counts.get(v, 0) + 1
    pc = _PreparedClause(c, lits)

    def note_negations(f: Formula, outside: dict[str, int]) -> None:
        if isinstance(f, Not):
            inner = set(formula_vars(f.arg))
            pc.local_vars[id(f)] = frozenset(v for v in inner if outside.get(v, 0) <= 1)
            note_negations(f.arg, outside)
        elif isinstance(f, (And, Or)):
            for i in f.items:
                note_negations(i, outside)

    for lit in lits:
        note_negations(lit, counts)
    return pc


class _Solver:
    def __init__(self, pc: _PreparedClause, db: Database, idb: frozenset[str], lookup: Lookup):
        self.pc = pc
        self.db = db
        self.idb = idb
        self.lookup = lookup

    # readiness ------------------------------------------------------------
    def ready(self, f: Formula, b: Binding) -> bool:
        if isinstance(f, Truth):
            return True
        if isinstance(f, Atom):
            return all(isinstance(a, Var) or _ground(a, b) for a in f.args)
        if isinstance(f, Cmp):
            lg, rg = _ground(f.left, b), _ground(f.right, b)
            if lg and rg:
                return True
            if f.op == "is":
                return rg and isinstance(f.left, Var)
            if f.op == "=":
                return (isinstance(f.left, Var) and rg) or (isinstance(f.right, Var) and lg)
            return False
        if isinstance(f, Not):
            local = self.pc.local_vars.get(id(f), frozenset())
            return all(v in b or v in local for v in formula_vars(f.arg))
        if isinstance(f, And):
            return any(self.ready(i, b) for i in f.items) if f.items else True
        if isinstance(f, Or):
            return all(self.ready(i, b) for i in f.items)
        raise TypeError(f"not a formula: {f!r}")

    # evaluation -----------------------------------------------------------
    def solve(self, lits: list[Formula], b: Binding) -> Iterator[Binding]:
        if not lits:
            yield b
            return
        pick = next((k for k, lit in enumerate(lits) if self.ready(lit, b)), None)
        if pick is None:
            pick = next((k for k, lit in enumerate(lits) if _is_alias(lit, b)), None)
            if pick is None:
                raise NotRangeRestricted(
                    f"clause for {self.pc.clause.head.pred} (line {self.pc.clause.line}) "
                    f"is not range-restricted: cannot evaluate {lits[0]!r} with bound {sorted(b)}"
                )
            lit = lits[pick]
            assert isinstance(lit, Cmp)
            rest = lits[:pick] + lits[pick + 1:]
            # alias the two variables: substitute one for the other in the rest
            from .ast import subst_formula

            lv, rv = lit.left.name, lit.right.name  # type: ignore[union-attr]
            env = {rv: Var(lv)}
            yield from (
                _extend_alias(nb, lv, rv)
                for nb in self.solve([subst_formula(x, env) for x in rest], b)
            )
            return
        lit = lits[pick]
        rest = lits[:pick] + lits[pick + 1:]
        for nb in self.step(lit, b):
            yield from self.solve(rest, nb)

    def step(self, f: Formula, b: Binding) -> Iterator[Binding]:
        try:
            if isinstance(f, Truth):
                if f.value:
                    yield b
                return
            if isinstance(f, Atom):
                yield from self.match_atom(f, b)
                return
            if isinstance(f, Cmp):
                yield from self.compare(f, b)
                return
            if isinstance(f, Not):
                if not any(True for _ in self.solve(_flatten(f.arg), b)):
                    yield b
                return
            if isinstance(f, And):
                yield from self.solve(list(f.items), b)
                return
            if isinstance(f, Or):
                yield from chain.from_iterable(self.solve(_flatten(i), b) for i in f.items)
                return
        except OperandTypeError as e:
            raise EvaluationError(f"type error in clause for {self.pc.clause.head.pred}: {e}") from None
        raise TypeError(f"not a formula: {f!r}")

    def compare(self, f: Cmp, b: Binding) -> Iterator[Binding]:
        lg, rg = _ground(f.left, b), _ground(f.right, b)
        if f.op in ("=", "is") and not (lg and rg):
            if not lg:
                assert isinstance(f.left, Var)
                nb = dict(b)
                nb[f.left.name] = eval_term(f.right, b)
                yield nb
            else:
                assert isinstance(f.right, Var)
                nb = dict(b)
                nb[f.right.name] = eval_term(f.left, b)
                yield nb
            return
        op = "=:=" if f.op in ("=", "is") else f.op
        if interp.compare(op, eval_term(f.left, b), eval_term(f.right, b)):
            yield b

    def match_atom(self, f: Atom, b: Binding) -> Iterator[Binding]:
        bound_vals: list[Value | None] = []
        pattern = []
        for a in f.args:
            if _ground(a, b):
                bound_vals.append(eval_term(a, b))
                pattern.append("b")
            else:
                bound_vals.append(None)
                pattern.append("f")
        pat = "".join(pattern)
        if f.pred in self.idb:
            key_vals = tuple(v for v, p in zip(bound_vals, pattern) if p == "b")
            rows: Iterable[tuple] = self.lookup(f.pred, pat, key_vals)
        else:
            try:
                rows = self.db[f.pred].rows
            except KeyError:
                raise EvaluationError(f"no table for EDB predicate {f.pred}") from None
        for row in rows:
            nb = b
            ok = True
            for a, v, p, val in zip(f.args, bound_vals, pattern, row):
                if p == "b":
                    if not interp.eq(v, val):
                        ok = False
                        break
                else:
                    name = a.name  # type: ignore[union-attr]
                    if name in nb:
                        if not interp.eq(nb[name], val):
                            ok = False
                            break
                    else:
                        if nb is b:
                            nb = dict(b)
                        nb[name] = val
            if ok:
                yield nb


def _is_alias(f: Formula, b: Binding) -> bool:
    return (
        isinstance(f, Cmp)
        and f.op == "="
        and isinstance(f.left, Var)
        and isinstance(f.right, Var)
        and f.left.name not in b
        and f.right.name not in b
    )


def _extend_alias(b: Binding, keep: str, alias: str) -> Binding:
    if keep in b and alias not in b:
        nb = dict(b)
        nb[alias] = b[keep]
        return nb
    return b


def _clause_results(pc: _PreparedClause, db: Database, idb: frozenset[str],
                    lookup: Lookup, inputs: Mapping[int, Value]) -> set[tuple]:
    head = pc.clause.head
    lits: list[Formula] = []
    for i, v in sorted(inputs.items()):
        lits.append(Cmp("=", head.args[i], Const(v)))
    lits.extend(pc.literals)
    solver = _Solver(pc, db, idb, lookup)
    out: set[tuple] = set()
    for b in solver.solve(lits, {}):
        try:
            row = tuple(eval_term(a, b) for a in head.args)
        except EvaluationError:
            raise NotRangeRestricted(
                f"head of clause for {head.pred} (line {pc.clause.line}) has an unbound variable"
            ) from None
        out.add(canonical_row(row))
    return out


def eval_rule(rule: Clause, db: Database, inputs: Mapping[int, Value] | None = None,
              idb: Mapping[str, Iterable[tuple]] | None = None) -> set[tuple]:
    """Evaluate one clause and return its head tuples.

    `inputs` fixes head positions to values; `idb` supplies complete
    relations for any IDB predicates the body refers to.
    """
    idb = dict(idb or {})
    names = frozenset(idb)

    def lookup(pred: str, pattern: str, vals: tuple) -> Iterable[tuple]:
        return idb.get(pred, ())

    return _clause_results(prepare_clause(rule), db, names, lookup, dict(inputs or {}))


# ---------------------------------------------------------------- programs


@dataclass(frozen=True)
class Answer:
    """Goal answers: the answer tuple set, plus the aggregate if any."""

    columns: tuple[str, ...]
    rows: frozenset[tuple]
    aggregate: object = None
    iterations: int = 0
    fixpoint: bool = False

    @property
    def is_aggregate(self) -> bool:
        return self.aggregate is not None


def check_stratified(program: Program) -> None:
    """Negation may only guard EDB atoms (and ground tests)."""
    idb = program.idb

    def walk(f: Formula, under_not: bool) -> None:
        if isinstance(f, Atom):
            if under_not and f.pred in idb:
                raise EvaluationError(f"negation on IDB predicate {f.pred} is not supported")
        elif isinstance(f, Not):
            walk(f.arg, True)
        elif isinstance(f, (And, Or)):
            for i in f.items:
                walk(i, under_not)

    for c in program.clauses:
        walk(c.body, False)


def goal_inputs(goal: Goal, args: Mapping[str, Value] | None) -> tuple[Value, ...]:
    args = dict(args or {})
    vals: list[Value] = []
    for _, a in goal.inputs:
        if isinstance(a, Const):
            vals.append(a.value)
        else:
            assert isinstance(a, Param)
            if a.name not in args:
                raise EvaluationError(f"missing client argument @{a.name}")
            vals.append(args[a.name])
    return tuple(vals)


def answer_columns(goal: Goal) -> tuple[str, ...]:
    cols = []
    for i in goal.answer_positions:
        a = goal.args[i]
        assert isinstance(a, Var)
        cols.append(a.name if not a.is_hole else f"_{i}")
    return tuple(cols)


def eval_program(program: Program, db: Database, args: Mapping[str, Value] | None = None,
                 max_iter: int = DEFAULT_MAX_ITER) -> Answer:
    """Answers to the program's goal after at most `max_iter` iterations."""
    if max_iter < 0:
        raise ValueError("max_iter must be non-negative")
    check_stratified(program)
    goal = program.goal
    idb = program.idb
    prepared = {p: [prepare_clause(c) for c in program.clauses_for(p)] for p in idb}
    in_vals = goal_inputs(goal, args)
    goal_key: TableKey = (goal.pred, goal.pattern, in_vals)

    def inputs_of(key: TableKey) -> dict[int, Value]:
        _, pattern, vals = key
        pos = [i for i, p in enumerate(pattern) if p == "b"]
        return dict(zip(pos, vals))

    # levels[i][key] is the table after i rounds of the immediate consequence
    # operator.  A table needed at round i is computed from round i-1, on
    # demand and memoised, so demand is exact and round 0 is empty.
    levels: list[dict[TableKey, frozenset[tuple]]] = [{}]

    def value(key: TableKey, level: int) -> frozenset[tuple]:
        if level == 0:
            return frozenset()
        table = levels[level]
        if key not in table:
            def lookup(pred: str, pattern: str, vals: tuple) -> Iterable[tuple]:
                return value((pred, pattern, vals), level - 1)

            rows: set[tuple] = set()
            for pc in prepared[key[0]]:
                rows |= _clause_results(pc, db, idb, lookup, inputs_of(key))
            table[key] = frozenset(rows)
        return table[key]

    iterations = 0
    fixpoint = False
    if goal.pred in idb:
        for it in range(1, max_iter + 1):
            levels.append({})
            value(goal_key, it)
            # keep every round closed over the keys of the round before, so
            # that two equal consecutive rounds really are a fixpoint
            while True:
                missing = [k for k in levels[it - 1] if k not in levels[it]]
                if not missing:
                    break
                for k in missing:
                    value(k, it)
            iterations = it
            if levels[it] == levels[it - 1]:
                fixpoint = True
                iterations = it - 1
                break
        goal_rows = levels[-1].get(goal_key, frozenset())
    elif program.schema(goal.pred) is None:
        goal_rows = frozenset()  # an adorned goal whose rules were all removed
        fixpoint = True
    else:
        if goal.pred not in db:
            raise EvaluationError(f"goal predicate {goal.pred} has no table")
        goal_rows = frozenset(
            r for r in db[goal.pred].rows
            if all(interp.eq(v, r[i]) for i, v in zip(goal.input_positions, in_vals))
        )
        fixpoint = True
    positions = goal.answer_positions
    answers = frozenset(canonical_row(tuple(r[i] for i in positions)) for r in goal_rows)
    cols = answer_columns(goal)
    agg = None
    if goal.aggregation is not None:
        idx = cols.index(goal.aggregation.over)
        agg = aggregate(answers, goal.aggregation.kind, idx)
    return Answer(cols, answers, agg, iterations, fixpoint)


def aggregate(rows: Iterable[tuple], kind: str, column: int) -> Value | object:
    """min/max/sum/count over one column of a set of answer tuples."""
    return interp.aggregate_values(kind, [r[column] for r in rows])


# ---------------------------------------------- relational algebra helpers
#
# Small set-based operators over (schema, rows) pairs.  They are what the
# clause evaluator computes implicitly; having them explicit lets the test
# suite check the textbook identities on random relations.


@dataclass(frozen=True)
class Rel:
    schema: tuple[str, ...]
    rows: frozenset[tuple]

    @classmethod
    def of(cls, rel: Relation) -> "Rel":
        return cls(tuple(c.name for c in rel.columns), rel.as_set())

    def binding(self, row: tuple) -> dict[str, Value]:
        return dict(zip(self.schema, row))


def select(r: Rel, cond: Formula) -> Rel:
    """σ_cond(r) for a predicate-free condition over r's attributes."""
    keep = []
    for row in r.rows:
        b = r.binding(row)
        if _holds(cond, b):
            keep.append(row)
    return Rel(r.schema, frozenset(keep))


def _holds(f: Formula, b: Mapping[str, Value]) -> bool:
    if isinstance(f, Truth):
        return f.value
    if isinstance(f, Cmp):
        op = "=:=" if f.op in ("=", "is") else f.op
        return interp.compare(op, eval_term(f.left, b), eval_term(f.right, b))
    if isinstance(f, Not):
        return not _holds(f.arg, b)
    if isinstance(f, And):
        return all(_holds(i, b) for i in f.items)
    if isinstance(f, Or):
        return any(_holds(i, b) for i in f.items)
    raise EvaluationError("select conditions must be predicate-free")


def union(a: Rel, b: Rel) -> Rel:
    assert a.schema == b.schema
    return Rel(a.schema, a.rows | b.rows)


def intersect(a: Rel, b: Rel) -> Rel:
    assert a.schema == b.schema
    return Rel(a.schema, a.rows & b.rows)


def difference(a: Rel, b: Rel) -> Rel:
    assert a.schema == b.schema
    return Rel(a.schema, a.rows - b.rows)


def project(r: Rel, attrs: Iterable[str]) -> Rel:
    attrs = tuple(attrs)
    idx = [r.schema.index(a) for a in attrs]
    return Rel(attrs, frozenset(tuple(row[i] for i in idx) for row in r.rows))


def cross(a: Rel, b: Rel) -> Rel:
    if set(a.schema) & set(b.schema):
        raise ValueError("cross product needs disjoint schemas")
    return Rel(a.schema + b.schema, frozenset(x + y for x in a.rows for y in b.rows))
