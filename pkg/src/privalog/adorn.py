"""Binding-pattern adornment, head desugaring and `=` resolution.

Starting from the goal, every IDB predicate occurrence gets a suffix `_σ`
where σ[i] is `b` when argument i is bound at that point and `f`
otherwise.  Boundness flows left to right through a rule body: a literal
sees the variables of the head's bound arguments plus everything bound by
the literals before it.  Only the adornments reachable from the goal are
generated, breadth first, and the result is listed by (predicate,
pattern).

The same left-to-right walk decides what each `=` means.  `X = t` with X
free and t ground is an assignment; once both sides are ground it is the
equality test `=:=`; two free variables are merged into one.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping

from .ast import (
    And,
    Atom,
    Clause,
    Cmp,
    Const,
    Formula,
    FreshNames,
    Goal,
    Not,
    Or,
    Program,
    Term,
    Truth,
    Var,
    clause_vars,
    conj,
    formula_vars,
    freshen_holes,
    subst_formula,
    term_vars,
)
from .errors import CompileError
from .normalize import to_ordered_dnf
from .parser import format_formula, format_term


def adorned_name(pred: str, pattern: str) -> str:
    return f"{pred}_{pattern}"


@dataclass(frozen=True)
class AdornedProgram:
    """An adorned, DNF-split program.

    `program` is an ordinary program whose IDB predicates carry adornment
    suffixes, so the reference evaluator runs it unchanged.
    """

    program: Program
    origin: Mapping[str, tuple[str, str]]
    bound_sets: tuple[tuple[frozenset[str], ...], ...] = ()
    dropped: tuple[str, ...] = field(default=())

    @property
    def patterns(self) -> dict[str, str]:
        return {name: pat for name, (_, pat) in self.origin.items()}

    @property
    def clauses(self) -> tuple[Clause, ...]:
        return self.program.clauses

    @property
    def goal(self) -> Goal:
        return self.program.goal


# --------------------------------------------------------------- heads


def _desugar_head(c: Clause, pattern: str | None) -> tuple[Atom, list[Formula], list[Formula]]:
    """Make head arguments distinct variables.

    Returns the new head plus literals to put before and after the body.
    With a pattern, a bound argument that is a variable or ground under
    the head's own bound variables is tested up front; everything else is
    checked or computed after the body.  Without a pattern every
    replacement goes after the body.
    """
    fresh = FreshNames(clause_vars(c), prefix="X_")
    head_bound: set[str] = set()
    if pattern is not None:
        seen: set[str] = set()
        for a, p in zip(c.head.args, pattern):
            if isinstance(a, Var) and a.name not in seen:
                seen.add(a.name)
                if p == "b":
                    head_bound.add(a.name)
    used: set[str] = set()
    args: list[Term] = []
    prefix: list[Formula] = []
    suffix: list[Formula] = []
    for i, a in enumerate(c.head.args):
        if isinstance(a, Var) and a.name not in used:
            used.add(a.name)
            args.append(a)
            continue
        v = Var(fresh())
        args.append(v)
        if pattern is not None and pattern[i] == "b":
            if isinstance(a, Var) or set(term_vars(a)) <= head_bound:
                prefix.append(Cmp("=", a, v))
            else:
                suffix.append(Cmp("=", a, v))
        else:
            suffix.append(Cmp("=", v, a))
    return Atom(c.head.pred, tuple(args)), prefix, suffix


def desugar_heads(p: Program) -> Program:
    """Rewrite every head to distinct variables, moving the rest into the body."""
    out = []
    for c in p.clauses:
        c = freshen_holes(c)
        head, prefix, suffix = _desugar_head(c, None)
        out.append(Clause(head, conj(prefix + [c.body] + suffix), c.line))
    return Program(p.schemas, tuple(out), p.goal)


# ------------------------------------------------------- `=` resolution


class _Walk:
    """Left-to-right walk of one conjunctive branch."""

    def __init__(self, head: Atom, literals: list[Formula], bound: Iterable[str],
                 idb: frozenset[str], line: int,
                 rename_atom: Callable[[Atom, str], Atom] | None):
        self.head = head
        self.queue = list(literals)
        self.bound = set(bound)
        self.idb = idb
        self.line = line
        self.rename_atom = rename_atom
        self.out: list[Formula] = []
        self.pending: list[Cmp] = []
        self.bound_sets: list[frozenset[str]] = [frozenset(self.bound)]
        self.head_vars = set(formula_vars(head))

    def fail(self, msg: str) -> CompileError:
        where = f" (line {self.line})" if self.line else ""
        return CompileError(f"clause for {self.head.pred}{where}: {msg}")

    def ground(self, t: Term | Formula) -> bool:
        if isinstance(t, (Atom, Cmp, Not, And, Or, Truth)):
            return all(v in self.bound for v in formula_vars(t))
        return all(v in self.bound for v in term_vars(t))

    def emit(self, lit: Formula) -> None:
        self.out.append(lit)
        self.bound |= set(formula_vars(lit)) if isinstance(lit, Atom) else set()
        self.bound_sets.append(frozenset(self.bound))

    def rename(self, old: str, new: str) -> None:
        env = {old: Var(new)}
        self.queue = [subst_formula(x, env) for x in self.queue]
        self.out = [subst_formula(x, env) for x in self.out]
        self.pending = [subst_formula(x, env) for x in self.pending]  # type: ignore[misc]

    def run(self) -> tuple[Clause, tuple[frozenset[str], ...]]:
        while self.queue:
            lit = self.queue.pop(0)
            self.literal(lit)
            self.retry_pending()
        if self.pending:
            raise self.fail(
                "cannot decide " + ", ".join(format_formula(p) for p in self.pending)
                + ": both sides stay unbound"
            )
        loose = sorted(self.head_vars - self.bound)
        if loose:
            raise self.fail(f"head variable(s) {', '.join(loose)} never bound by the body")
        return Clause(self.head, conj(self.out), self.line), tuple(self.bound_sets)

    def retry_pending(self) -> None:
        progress = True
        while progress and self.pending:
            progress = False
            for p in list(self.pending):
                if self.ground(p.left) or self.ground(p.right):
                    self.pending.remove(p)
                    self.equality(p)
                    progress = True

    def literal(self, lit: Formula) -> None:
        if isinstance(lit, Truth):
            if not lit.value:
                raise self.fail("body is false")  # DNF never leaves `false`
            return
        if isinstance(lit, And):
            self.queue[:0] = list(lit.items)
            return
        if isinstance(lit, Atom):
            self.atom(lit)
            return
        if isinstance(lit, Cmp):
            if lit.op in ("=", "is"):
                self.equality(lit)
            else:
                if not self.ground(lit):
                    raise self.fail(f"comparison {format_formula(lit)} is not ground at its position")
                self.emit(lit)
            return
        if isinstance(lit, Not):
            self.negation(lit)
            return
        if isinstance(lit, Or):
            if not self.ground(lit):
                raise self.fail(f"disjunction {format_formula(lit)} is not ground at its position")
            self.emit(self.ground_test(lit))
            return
        raise TypeError(f"not a formula: {lit!r}")

    def ground_test(self, f: Formula) -> Formula:
        """Inside a ground test every `=` is an equality comparison."""
        if isinstance(f, Cmp) and f.op in ("=", "is"):
            return _eq_test(f.left, f.right)
        if isinstance(f, Not):
            return Not(self.ground_test(f.arg))
        if isinstance(f, And):
            return And(tuple(self.ground_test(i) for i in f.items))
        if isinstance(f, Or):
            return Or(tuple(self.ground_test(i) for i in f.items))
        return f

    def atom(self, a: Atom) -> None:
        pattern = []
        for t in a.args:
            if self.ground(t):
                pattern.append("b")
            elif isinstance(t, Var):
                pattern.append("f")
            else:
                raise self.fail(f"argument {format_term(t)} of {a.pred} "
                                "is an expression over unbound variables")
        if self.rename_atom is not None:
            a = self.rename_atom(a, "".join(pattern))
        self.emit(a)

    def negation(self, n: Not) -> None:
        inner = n.arg
        if isinstance(inner, Atom):
            if inner.pred in self.idb:
                raise self.fail(f"negation of IDB predicate {inner.pred} is not supported")
            elsewhere = set(formula_vars(self.head))
            for x in self.out + self.queue + self.pending:
                elsewhere |= set(formula_vars(x))
            for t in inner.args:
                if self.ground(t):
                    continue
                if isinstance(t, Var) and t.name not in elsewhere \
                        and sum(1 for u in inner.args if u == t) == 1:
                    continue  # existential: occurs only here
                raise self.fail(
                    f"negated atom {format_formula(inner)} has unbound variables; "
                    "negation needs its variables bound first"
                )
            self.emit(n)
            return
        if not self.ground(inner):
            raise self.fail(f"negated test {format_formula(inner)} is not ground at its position")
        self.emit(Not(self.ground_test(inner)))

    def equality(self, c: Cmp) -> None:
        left, right = c.left, c.right
        lg, rg = self.ground(left), self.ground(right)
        if lg and rg:
            self.emit(_eq_test(left, right))
            return
        if isinstance(left, Var) and not lg and rg:
            self.assign(left.name, right)
            return
        if isinstance(right, Var) and not rg and lg:
            self.assign(right.name, left)
            return
        if isinstance(left, Var) and isinstance(right, Var):
            l, r = left.name, right.name
            if l == r:
                return  # X = X with X unbound says nothing
            if l in self.head_vars and r in self.head_vars:
                self.pending.append(Cmp("=", left, right))
                return
            if r in self.head_vars:
                self.rename(l, r)
            else:
                self.rename(r, l)
            return
        raise self.fail(
            f"{format_formula(c)}: cannot assign from an expression with unbound variables"
        )

    def assign(self, name: str, value: Term) -> None:
        self.out.append(Cmp("=", Var(name), value))
        self.bound.add(name)
        self.bound_sets.append(frozenset(self.bound))


def _eq_test(left: Term, right: Term) -> Cmp:
    if isinstance(left, Const) and not isinstance(right, Const):
        left, right = right, left
    return Cmp("=:=", left, right)


def resolve_clause(c: Clause, head_bound: Iterable[str], idb: frozenset[str],
                   rename_atom: Callable[[Atom, str], Atom] | None = None
                   ) -> tuple[Clause, tuple[frozenset[str], ...]]:
    """Resolve `=`/`is` in a conjunctive clause and check groundness.

    Raises CompileError when a literal cannot be evaluated at its position.
    """
    from .normalize import nnf

    lits = list(_flatten(nnf(c.body)))
    return _Walk(c.head, lits, head_bound, idb, c.line, rename_atom).run()


def _flatten(f: Formula) -> Iterable[Formula]:
    if isinstance(f, And):
        for i in f.items:
            yield from _flatten(i)
    elif f != Truth(True):
        yield f


# ----------------------------------------------------------------- adorn


def _head_bound(head: Atom, pattern: str) -> frozenset[str]:
    return frozenset(
        a.name for a, p in zip(head.args, pattern) if p == "b" and isinstance(a, Var)
    )


def adorn_clause(c: Clause, pattern: str, idb: frozenset[str],
                 rename_atom: Callable[[Atom, str], Atom]
                 ) -> list[tuple[Clause, tuple[frozenset[str], ...]]]:
    """Adorn one source clause for one binding pattern (one result per DNF branch)."""
    c = freshen_holes(c, FreshNames(clause_vars(c), prefix="X_"))
    head, prefix, suffix = _desugar_head(c, pattern)
    head = Atom(adorned_name(c.head.pred, pattern), head.args)
    bound = _head_bound(head, pattern)
    out = []
    for branch in to_ordered_dnf(conj(prefix + [c.body] + suffix), bound):
        if branch == Truth(False):
            continue
        out.append(resolve_clause(Clause(head, branch, c.line), bound, idb, rename_atom))
    return out


def adorn(program: Program) -> AdornedProgram:
    """Adorn every rule needed by the goal, split into DNF branches."""
    goal = program.goal
    idb = program.idb
    if goal.pred not in idb:
        if goal.pred in program.edb:
            raise CompileError(
                f"goal queries EDB table {goal.pred} directly; wrap it in a rule"
            )
        raise CompileError(f"goal predicate {goal.pred} has no rules")
    start = (goal.pred, goal.pattern)
    queue = deque([start])
    seen = {start}
    adorned_idb: set[str] = set()

    def rename(a: Atom, pat: str) -> Atom:
        if a.pred not in idb:
            return a
        key = (a.pred, pat)
        if key not in seen:
            seen.add(key)
            queue.append(key)
        return Atom(adorned_name(a.pred, pat), a.args)

    results: dict[tuple[str, str], list[tuple[Clause, tuple]]] = {}
    while queue:
        pred, pat = queue.popleft()
        adorned_idb.add(adorned_name(pred, pat))
        rows = []
        for c in program.clauses_for(pred):
            rows.extend(adorn_clause(c, pat, idb, rename))
        results[(pred, pat)] = rows

    # an adorned predicate may end with no clauses at all; atoms on it are false
    clauses = {k: list(v) for k, v in results.items()}
    changed = True
    while changed:
        changed = False
        empty = {adorned_name(*k) for k, v in clauses.items() if not v}
        for k, v in clauses.items():
            keep = [r for r in v if not any(
                isinstance(a, Atom) and a.pred in empty for a in _flatten(r[0].body))]
            if len(keep) != len(v):
                clauses[k] = keep
                changed = True

    ordered = sorted(clauses)
    all_clauses = tuple(r[0] for k in ordered for r in clauses[k])
    bounds = tuple(r[1] for k in ordered for r in clauses[k])
    origin = {adorned_name(*k): k for k in ordered}
    new_goal = Goal(adorned_name(*start), goal.args, goal.aggregation)
    reached = {k[0] for k in ordered}
    dropped = tuple(sorted(idb - reached))
    return AdornedProgram(
        Program(program.schemas, all_clauses, new_goal), origin, bounds, dropped
    )


def split_eq(ap: AdornedProgram) -> AdornedProgram:
    """Re-run `=` resolution on an adorned program (idempotent)."""
    idb = frozenset(ap.origin)
    pats = ap.patterns
    clauses, bounds = [], []
    for c in ap.clauses:
        pat = pats.get(c.head.pred, "f" * len(c.head.args))
        rc, bs = resolve_clause(c, _head_bound(c.head, pat), idb)
        clauses.append(rc)
        bounds.append(bs)
    prog = Program(ap.program.schemas, tuple(clauses), ap.goal)
    return AdornedProgram(prog, ap.origin, tuple(bounds), ap.dropped)


def split_rules(ap: AdornedProgram) -> AdornedProgram:
    """One clause per DNF branch.  `adorn` already splits, so this is a no-op
    on its output; it matters for hand-built adorned programs."""
    from .normalize import split_program

    prog = split_program(ap.program, ap.patterns)
    if prog.clauses == ap.program.clauses:
        return ap
    return split_eq(AdornedProgram(prog, ap.origin, (), ap.dropped))
