"""Negation normal form and order-preserving disjunctive normal form.

A rule body with a disjunction is split into one rule per branch, except
when the disjunction is ground and mentions no predicate: such a
disjunction is a plain boolean test and stays as a single literal.
Literal order inside every branch follows the source order.
"""

from __future__ import annotations

from typing import Iterable

from .ast import (
    And,
    Atom,
    Clause,
    Cmp,
    Formula,
    Not,
    Or,
    Program,
    Truth,
    Var,
    atoms_of,
    conj,
    formula_vars,
    term_vars,
)


def nnf(f: Formula) -> Formula:
    """Push negations down to atoms and comparisons.

    Negated comparisons are *not* flipped (`\\+ X < Y` is not `X >= Y` once
    garbage values are around), so negation stays in front of them.
    """
    if isinstance(f, Not):
        g = f.arg
        if isinstance(g, Not):
            return nnf(g.arg)
        if isinstance(g, Truth):
            return Truth(not g.value)
        if isinstance(g, And):
            return Or(tuple(nnf(Not(i)) for i in g.items))
        if isinstance(g, Or):
            return And(tuple(nnf(Not(i)) for i in g.items))
        return f
    if isinstance(f, And):
        return And(tuple(nnf(i) for i in f.items))
    if isinstance(f, Or):
        return Or(tuple(nnf(i) for i in f.items))
    return f


def is_predicate_free(f: Formula) -> bool:
    return next(atoms_of(f), None) is None


def binds(lit: Formula, bound: frozenset[str]) -> frozenset[str]:
    """Variables a literal is guaranteed to bind, given `bound` before it."""
    if isinstance(lit, Atom):
        return frozenset(formula_vars(lit))
    if isinstance(lit, Cmp) and lit.op in ("=", "is"):
        lg = set(term_vars(lit.left)) <= bound
        rg = set(term_vars(lit.right)) <= bound
        if isinstance(lit.left, Var) and rg:
            return frozenset({lit.left.name})
        if lit.op == "=" and isinstance(lit.right, Var) and lg:
            return frozenset({lit.right.name})
    return frozenset()


def to_ordered_dnf(body: Formula, bound: Iterable[str] = ()) -> list[Formula]:
    """Split `body` into conjunctive branches, keeping source order.

    `bound` holds the variables known to be bound before the body starts
    (the head's bound arguments).  A disjunction that is ground at its
    position and has no atoms is kept whole; any other disjunction is
    distributed over the surrounding conjunction.
    """
    branches: list[Formula] = []
    start = frozenset(bound)

    def walk(queue: list[Formula], acc: list[Formula], b: frozenset[str]) -> None:
        while queue:
            head = queue.pop(0)
            if isinstance(head, And):
                queue[:0] = list(head.items)
                continue
            if isinstance(head, Truth):
                if head.value:
                    continue
                return
            if isinstance(head, Or):
                if is_predicate_free(head) and set(formula_vars(head)) <= b:
                    acc = acc + [head]
                    continue
                for item in head.items:
                    walk([item] + queue, list(acc), b)
                return
            acc = acc + [head]
            b = b | binds(head, b)
        branches.append(conj(acc))

    walk([nnf(body)], [], start)
    return branches


def split_clause(c: Clause, bound: Iterable[str] = ()) -> list[Clause]:
    return [Clause(c.head, br, c.line) for br in to_ordered_dnf(c.body, bound)]


def head_bound_vars(head: Atom, pattern: str) -> frozenset[str]:
    return frozenset(
        a.name for a, p in zip(head.args, pattern) if p == "b" and isinstance(a, Var)
    )


def split_program(p: Program, patterns: dict[str, str] | None = None) -> Program:
    """Replace every clause by one clause per DNF branch.

    `patterns` maps (adorned) predicate names to their binding pattern so
    that head-bound variables count as bound; without it nothing is.
    """
    patterns = patterns or {}
    out: list[Clause] = []
    for c in p.clauses:
        pat = patterns.get(c.head.pred, "")
        out.extend(split_clause(c, head_bound_vars(c.head, pat)))
    return Program(p.schemas, tuple(out), p.goal)
