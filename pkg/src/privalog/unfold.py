"""Unfolding: compile IDB calls away by iterating inlining to a fixpoint.

The rule base RB_k holds, for every adorned IDB predicate, rules whose
bodies mention only EDB predicates.  RB_0 is empty and RB_k is obtained by
taking every program rule and replacing each IDB atom in it by the body of
each RB_{k-1} rule for that predicate, in every combination.  This is the
symbolic counterpart of the immediate consequence operator, so RB_k
describes exactly the facts with proof trees of height at most k.  The
iteration stops when RB_k equals RB_{k-1} up to variable renaming, or at
the bound.

The `leftmost` strategy is the cheaper depth-first variant: each step
inlines only the first IDB atom of each unfinished rule, using the program
rules themselves.  Rules still unfinished at the bound are dropped.

After each inlining step a rule is cleaned up: `=` is re-resolved,
assignments to body-only variables are substituted away (with constant
folding), duplicate literals are dropped, variables are renamed
canonically (`X_0`, `X_1`, ... with the head first) and inconsistent rules
are pruned.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Iterator

from . import interp
from .adorn import AdornedProgram, resolve_clause
from .ast import (
    And,
    Atom,
    BinOp,
    Clause,
    Cmp,
    Const,
    Formula,
    FreshNames,
    Goal,
    Not,
    Or,
    Program,
    SchemaDecl,
    Sqrt,
    Term,
    Truth,
    Var,
    clause_vars,
    conj,
    formula_vars,
    subst_formula,
    term_vars,
)
from .errors import CompileError
from .prune import ExternalSolver, Verdict, check_consistent, merge_primary_keys

log = logging.getLogger(__name__)

DEFAULT_MAX_UNFOLD = 10
STRATEGIES = ("full", "leftmost")


@dataclass(frozen=True)
class RuleBase:
    """Inlined rules for every adorned IDB predicate."""

    rules: tuple[Clause, ...]
    iterations: int = 0
    fixpoint: bool = False
    pruned: int = 0
    dropped: int = 0
    strategy: str = "full"

    def for_pred(self, pred: str) -> tuple[Clause, ...]:
        return tuple(r for r in self.rules if r.head.pred == pred)

    def replace_rules(self, rules: Iterable[Clause], pruned: int = 0) -> "RuleBase":
        return replace(self, rules=tuple(rules), pruned=self.pruned + pruned)

    def to_program(self, schemas: Iterable[SchemaDecl], goal: Goal) -> Program:
        return Program(tuple(schemas), self.rules, goal)


# ------------------------------------------------------------- clean-up


def _flat(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        return [x for i in f.items for x in _flat(i)]
    if f == Truth(True):
        return []
    return [f]


def fold_term(t: Term) -> Term:
    """Evaluate operators whose operands are constants.

    Folding uses the evaluator's own operator table, so it never changes a
    value; results that are garbage or infinite are left unfolded.
    """
    if isinstance(t, BinOp):
        l, r = fold_term(t.left), fold_term(t.right)
        if isinstance(l, Const) and isinstance(r, Const):
            try:
                v = interp.ARITH[t.op](l.value, r.value)
            except interp.OperandTypeError:
                return BinOp(t.op, l, r)
            if not isinstance(v, str) and math.isfinite(v):
                return Const(v)
        return BinOp(t.op, l, r)
    if isinstance(t, Sqrt):
        a = fold_term(t.arg)
        if isinstance(a, Const):
            try:
                v = interp.sqrt(a.value)
            except interp.OperandTypeError:
                return Sqrt(a)
            if math.isfinite(v):
                return Const(v)
        return Sqrt(a)
    return t


def fold_formula(f: Formula) -> Formula:
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(fold_term(a) for a in f.args))
    if isinstance(f, Cmp):
        return Cmp(f.op, fold_term(f.left), fold_term(f.right))
    if isinstance(f, Not):
        return Not(fold_formula(f.arg))
    if isinstance(f, And):
        return And(tuple(fold_formula(i) for i in f.items))
    if isinstance(f, Or):
        return Or(tuple(fold_formula(i) for i in f.items))
    return f


def eliminate_assignments(c: Clause) -> Clause:
    """Substitute away `V = t` when V does not occur in the head."""
    head_vars = set(formula_vars(c.head))
    lits = _flat(c.body)
    out: list[Formula] = []
    env: dict[str, Term] = {}
    for lit in lits:
        if env:
            lit = fold_formula(subst_formula(lit, env))
        if (isinstance(lit, Cmp) and lit.op == "=" and isinstance(lit.left, Var)
                and lit.left.name not in head_vars):
            env[lit.left.name] = fold_term(lit.right)
            continue
        out.append(lit)
    return Clause(c.head, conj(out), c.line)


def dedupe_literals(c: Clause) -> Clause:
    seen: set = set()
    out = []
    for lit in _flat(c.body):
        if lit in seen:
            continue
        seen.add(lit)
        out.append(lit)
    return Clause(c.head, conj(out), c.line)


def canonicalize(c: Clause) -> Clause:
    """Rename variables to X_0, X_1, ... in order of first occurrence, head first."""
    names: dict[str, str] = {}
    for v in clause_vars(c):
        if v not in names:
            names[v] = f"X_{len(names)}"
    # two passes so the new names cannot capture old ones
    tmp = {v: Var(f"\0{n}") for v, n in names.items()}
    c2 = Clause(subst_formula(c.head, tmp), subst_formula(c.body, tmp), c.line)  # type: ignore[arg-type]
    back = {f"\0{n}": Var(n) for n in names.values()}
    return Clause(subst_formula(c2.head, back), subst_formula(c2.body, back), c.line)  # type: ignore[arg-type]


# ------------------------------------------------------------ inlining


def _rename_apart(rule: Clause, args: tuple[Term, ...], fresh: FreshNames) -> list[Formula]:
    """Body of `rule` with its head bound to `args` and other variables fresh."""
    env: dict[str, Term] = {}
    for hv, a in zip(rule.head.args, args):
        assert isinstance(hv, Var), "rule heads are distinct variables after adornment"
        env[hv.name] = a
    for v in clause_vars(rule):
        if v not in env:
            env[v] = Var(fresh())
    return [subst_formula(x, env) for x in _flat(rule.body)]


class _Unfolder:
    def __init__(self, ap: AdornedProgram, prune: bool, solver: ExternalSolver | None,
                 merge_keys: bool):
        self.ap = ap
        self.idb = frozenset(ap.origin)
        self.patterns = ap.patterns
        self.prune = prune
        self.solver = solver
        self.merge_keys = merge_keys
        self.schemas = ap.program.schemas
        self.pruned = 0

    def head_bound(self, head: Atom) -> frozenset[str]:
        pat = self.patterns.get(head.pred, "")
        return frozenset(a.name for a, p in zip(head.args, pat) if p == "b" and isinstance(a, Var))

    def consistent(self, lits: list[Formula]) -> bool:
        if not self.prune:
            return True
        body = conj([x for x in lits if not (isinstance(x, Atom) and x.pred in self.idb)])
        if check_consistent(body, self.solver) is Verdict.UNSAT:
            self.pruned += 1
            return False
        return True

    def finish(self, head: Atom, lits: list[Formula], line: int) -> Clause | None:
        c = Clause(head, conj(lits), line)
        c, _ = resolve_clause(c, self.head_bound(head), self.idb)
        if self.merge_keys:
            c = merge_primary_keys(c, self.schemas, self.head_bound(head))
        c = dedupe_literals(eliminate_assignments(c))
        c = canonicalize(c)
        if self.prune and check_consistent(c.body, self.solver) is Verdict.UNSAT:
            self.pruned += 1
            return None
        return c

    def expand(self, rule: Clause, rb: dict[str, list[Clause]], only_first: bool
               ) -> Iterator[list[Formula]]:
        """All bodies obtained by inlining IDB atoms of `rule` with rules from `rb`."""
        fresh = FreshNames(clause_vars(rule), prefix="V")
        lits = _flat(rule.body)

        def go(i: int, acc: list[Formula], inlined: bool) -> Iterator[list[Formula]]:
            if i == len(lits):
                yield acc
                return
            lit = lits[i]
            if isinstance(lit, Atom) and lit.pred in self.idb and not (only_first and inlined):
                for r in rb.get(lit.pred, ()):
                    spliced = acc + _rename_apart(r, lit.args, fresh)
                    if self.consistent(spliced):
                        yield from go(i + 1, spliced, True)
                return
            yield from go(i + 1, acc + [lit], inlined)

        yield from go(0, [], False)


def _has_idb(c: Clause, idb: frozenset[str]) -> bool:
    return any(isinstance(x, Atom) and x.pred in idb for x in _flat(c.body))


def _by_pred(rules: Iterable[Clause]) -> dict[str, list[Clause]]:
    out: dict[str, list[Clause]] = {}
    for r in rules:
        out.setdefault(r.head.pred, []).append(r)
    return out


def _add(rules: list[Clause], seen: set[Clause], c: Clause | None) -> None:
    if c is not None and c not in seen:
        seen.add(c)
        rules.append(c)


def unfold_program(ap: AdornedProgram, max_iter: int = DEFAULT_MAX_UNFOLD,
                   strategy: str = "full", prune: bool = True,
                   solver: ExternalSolver | None = None, merge_keys: bool = False) -> RuleBase:
    """Inline IDB predicates until no IDB atom is left or the bound is hit."""
    if max_iter < 0:
        raise ValueError("max_iter must be non-negative")
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown unfolding strategy {strategy!r}")
    u = _Unfolder(ap, prune, solver, merge_keys)
    program_rules = list(ap.clauses)
    if strategy == "full":
        rb: dict[str, list[Clause]] = {}
        current: list[Clause] = []
        fixpoint = False
        iterations = 0
        for k in range(1, max_iter + 1):
            new: list[Clause] = []
            seen: set[Clause] = set()
            for rule in program_rules:
                for body in u.expand(rule, rb, only_first=False):
                    _add(new, seen, u.finish(rule.head, body, rule.line))
            iterations = k
            if set(new) == set(current):
                fixpoint = True
                iterations = k - 1
                break
            current = new
            rb = _by_pred(current)
        if not fixpoint:
            log.warning("unfolding stopped at the bound %d before reaching a fixpoint", max_iter)
        return RuleBase(tuple(current), iterations, fixpoint, u.pruned, 0, strategy)

    # leftmost: expand the first IDB atom of each unfinished rule
    prog_rb = _by_pred(program_rules)
    done: list[Clause] = []
    done_seen: set[Clause] = set()
    work: list[Clause] = []
    work_seen: set[Clause] = set()
    for r in program_rules:
        c = u.finish(r.head, _flat(r.body), r.line)
        if c is None:
            continue
        if _has_idb(c, u.idb):
            _add(work, work_seen, c)
        else:
            _add(done, done_seen, c)
    iterations = 0
    while work and iterations < max_iter:
        iterations += 1
        nxt: list[Clause] = []
        nxt_seen: set[Clause] = set()
        for rule in work:
            for body in u.expand(rule, prog_rb, only_first=True):
                c = u.finish(rule.head, body, rule.line)
                if c is None:
                    continue
                if _has_idb(c, u.idb):
                    _add(nxt, nxt_seen, c)
                else:
                    _add(done, done_seen, c)
        work = nxt
    if work:
        log.warning("unfolding stopped at the bound %d; dropping %d unfinished rules",
                    max_iter, len(work))
    return RuleBase(tuple(done), iterations, not work, u.pruned, len(work), strategy)
