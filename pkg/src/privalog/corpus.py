"""Random test fixtures: small programs together with databases and arguments.

Every generated program is stratified, range-restricted and semipositive:

* at most three IDB rules and at most two EDB tables of at most eight rows,
  with integer columns drawn from [-10, 10];
* IDB predicates only call earlier ones, except for an optional counter
  recursion whose recursive call is never the leftmost body atom and whose
  depth is capped by comparisons, so unfolding reaches a fixpoint;
* at most one negated EDB atom, whose extra arguments are `_`;
* an optional terminal aggregation (count, sum, min or max).

A fixture directory holds `program.pl`, `args.json` and a `db/`
subdirectory in the datastore layout.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path

from .ast import (
    AGG_KINDS,
    Aggregation,
    Atom,
    BinOp,
    Clause,
    Cmp,
    Column,
    Const,
    Formula,
    Goal,
    Not,
    Param,
    Program,
    SchemaDecl,
    Term,
    Var,
    conj,
)
from .datastore import save_database
from .parser import format_program
from .refeval import eval_program
from .relation import Database, Relation

LO, HI = -10, 10
MAX_ROWS = 8
MAX_RULES = 3
MAX_TABLES = 2
MAX_DEPTH = 2  # largest counter accepted by a recursive rule
DB_TRIES = 6


@dataclass(frozen=True)
class Fixture:
    name: str
    program: Program
    db: Database
    args: dict

    @property
    def source(self) -> str:
        return format_program(self.program)

    def save(self, directory: str | Path) -> Path:
        d = Path(directory) / self.name
        (d / "db").mkdir(parents=True, exist_ok=True)
        (d / "program.pl").write_text(self.source)
        (d / "args.json").write_text(json.dumps(self.args, sort_keys=True) + "\n")
        save_database(self.db, d / "db")
        return d


class _Gen:
    def __init__(self, rng: random.Random):
        self.rng = rng
        self.nvar = 0

    def var(self) -> Var:
        self.nvar += 1
        return Var(f"V{self.nvar}")

    def const(self) -> Const:
        # mostly small constants, so that tests and joins are often satisfiable
        if self.rng.random() < 0.7:
            return Const(self.rng.randint(-3, 3))
        return Const(self.rng.randint(LO, HI))

    # ------------------------------------------------------------- tables
    def tables(self) -> list[SchemaDecl]:
        out = []
        for k in range(self.rng.randint(1, MAX_TABLES)):
            arity = self.rng.randint(1, 3)
            cols = tuple(Column(f"c{i}", self.rng.choice(("public", "private")), "int")
                         for i in range(arity))
            key = 0 if arity > 1 and self.rng.random() < 0.3 else None
            out.append(SchemaDecl(f"e{k + 1}", cols, key))
        return out

    def rows(self, s: SchemaDecl) -> list[tuple]:
        # a narrow value range for some tables makes joins hit more often
        lo, hi = (LO, HI) if self.rng.random() < 0.3 else (-3, 3)
        n = self.rng.randint(0, MAX_ROWS) if self.rng.random() < 0.2 else self.rng.randint(3, MAX_ROWS)
        rows = [tuple(self.rng.randint(lo, hi) for _ in s.columns) for _ in range(n)]
        if s.primary_key is not None:
            k = s.primary_key
            rows = list({r[k]: r for r in rows}.values())  # keep keys unique
        return rows

    # ------------------------------------------------------------- bodies
    def atom(self, pred: str, arity: int, bound: list[Var]) -> tuple[Atom, list[Var]]:
        args: list[Term] = []
        new: list[Var] = []
        for _ in range(arity):
            r = self.rng.random()
            if bound and r < 0.3:
                args.append(self.rng.choice(bound))  # a join
            elif r < 0.35:
                args.append(self.const())
            else:
                v = self.var()
                args.append(v)
                new.append(v)
        return Atom(pred, tuple(args)), new

    def test(self, bound: list[Var]) -> Formula:
        op = self.rng.choice(("<", "=<", ">", ">=", "=:=", "=/="))
        left: Term = self.rng.choice(bound)
        if self.rng.random() < 0.3:
            left = BinOp(self.rng.choice("+-*"), left, self.const())
        right: Term = self.rng.choice(bound) if self.rng.random() < 0.5 else self.const()
        return Cmp(op, left, right)

    def rule(self, head_pred: str, callable_: list[tuple[str, int]], tables: list[SchemaDecl],
             negation: bool) -> tuple[Clause, bool]:
        bound: list[Var] = []
        lits: list[Formula] = []
        for _ in range(self.rng.randint(1, 2)):
            pred, arity = self.rng.choice(callable_)
            a, new = self.atom(pred, arity, bound)
            lits.append(a)
            bound += new
        if not bound:
            a, new = self.atom(tables[0].pred, tables[0].arity, [])
            v = self.var()
            lits.append(a)
            lits.append(Cmp("is", v, self.const()))
            bound += new + [v]
        for _ in range(self.rng.choice((0, 0, 1, 1, 2))):
            lits.append(self.test(bound))
        if self.rng.random() < 0.35:
            v = self.var()
            x = self.rng.choice(bound)
            e: Term = BinOp(self.rng.choice(("+", "-", "*")), x,
                            self.rng.choice(bound) if self.rng.random() < 0.5 else self.const())
            if self.rng.random() < 0.1:
                e = BinOp("/", x, Const(self.rng.choice((2, 4, -5))))
            lits.append(Cmp("is", v, e))
            bound.append(v)
        used_neg = False
        if negation and self.rng.random() < 0.5:
            t = self.rng.choice(tables)
            args: list[Term] = []
            for _ in t.columns:
                r = self.rng.random()
                args.append(self.rng.choice(bound) if r < 0.6 else
                            (self.const() if r < 0.8 else Var("_")))
            lits.append(Not(Atom(t.pred, tuple(args))))
            used_neg = True
        arity = self.rng.randint(1, min(3, len(bound)))
        head = Atom(head_pred, tuple(self.rng.sample(bound, arity)))
        return Clause(head, conj(lits)), used_neg

    def recursive(self, tables: list[SchemaDecl]) -> list[Clause]:
        """r(N, Y): counter recursion, N bounded by 0 =< N =< MAX_DEPTH."""
        t = self.rng.choice(tables)
        n, y, m, z = Var("N"), Var("Y"), Var("M"), Var("Z")
        a, new = self.atom(t.pred, t.arity, [])
        if not new:
            a = Atom(t.pred, (y,) + a.args[1:])
            new = [y]
        base = Clause(Atom("r", (n, new[0])), conj([Cmp("=:=", n, Const(0)), a]))
        step = Clause(Atom("r", (n, z)), conj([
            Cmp(">", n, Const(0)), Cmp("=<", n, Const(MAX_DEPTH)),
            Cmp("is", m, BinOp("-", n, Const(1))),
            Atom("r", (m, y)),
            Cmp("is", z, BinOp("+", y, Const(self.rng.randint(-2, 2)))),
        ]))
        return [base, step]

    # ------------------------------------------------------------- programs
    def program(self) -> tuple[Program, dict]:
        tables = self.tables()
        edb = [(t.pred, t.arity) for t in tables]
        clauses: list[Clause] = []
        idb: list[tuple[str, int]] = []
        negation = True
        recursive = self.rng.random() < 0.15
        if recursive:
            # the recursive predicate is the goal; nothing else calls it
            clauses += self.recursive(tables)
            idb.append(("r", 2))
        while not recursive and len(clauses) < MAX_RULES:
            k = len(idb) + 1
            name = f"p{k}"
            # reuse the previous head name sometimes: two rules, one predicate
            if idb and self.rng.random() < 0.3:
                name, _ = idb[-1]
                callable_ = edb + idb[:-1]
            else:
                callable_ = edb + idb
            c, used = self.rule(name, callable_, tables, negation)
            negation = negation and not used
            if idb and idb[-1][0] == name:
                want = idb[-1][1]
                if len(c.head.args) != want:
                    continue
            else:
                idb.append((name, len(c.head.args)))
            clauses.append(c)
            if self.rng.random() < 0.3:
                break
        goal_pred, arity = idb[-1]
        args: list[Term] = []
        client: dict = {}
        for i in range(arity):
            r = self.rng.random()
            if goal_pred == "r" and i == 0:
                # the counter: bound by a constant or a client argument
                d = self.rng.randint(-1, MAX_DEPTH + 1)
                if r < 0.5:
                    args.append(Const(d))
                else:
                    args.append(Param("k"))
                    client["k"] = d
            elif r < 0.15 and i < arity - 1:
                args.append(Const(self.rng.randint(-3, 3)))
            elif r < 0.25 and i < arity - 1:
                name = f"a{i}"
                args.append(Param(name))
                client[name] = self.rng.randint(-3, 3)
            else:
                args.append(Var(f"O{i}"))
        outs = [a for a in args if isinstance(a, Var)]
        if not outs:
            args[-1] = Var(f"O{arity - 1}")
            outs = [args[-1]]
            client = {k: v for k, v in client.items()
                      if any(isinstance(a, Param) and a.name == k for a in args)}
        agg = None
        if self.rng.random() < 0.3:
            over = self.rng.choice(outs)
            agg = Aggregation(self.rng.choice(AGG_KINDS), over.name, "Result")
        program = Program(tuple(tables), tuple(clauses), Goal(goal_pred, tuple(args), agg))
        return program, client


def generate_fixture(seed: int, index: int) -> Fixture:
    """Fixture number `index` of the corpus for `seed` (independent of the count)."""
    rng = random.Random(f"privalog-corpus:{seed}:{index}")
    g = _Gen(rng)
    program, args = g.program()
    # prefer a database on which the goal has answers; empty answers are
    # still produced when no candidate gives any
    db = Database()
    for _ in range(DB_TRIES):
        db = Database(Relation.from_schema(s, g.rows(s)) for s in program.schemas)
        if eval_program(program, db, args).rows:
            break
    return Fixture(f"fixture_{index:04d}", program, db, args)


def gen_corpus(seed: int, count: int) -> list[Fixture]:
    return [generate_fixture(seed, i) for i in range(count)]


def write_corpus(directory: str | Path, seed: int, count: int) -> list[Path]:
    return [f.save(directory) for f in gen_corpus(seed, count)]


def load_fixture(directory: str | Path) -> tuple[str, Path, dict]:
    """(program source, database directory, client arguments) of a saved fixture."""
    d = Path(directory)
    args = json.loads((d / "args.json").read_text()) if (d / "args.json").exists() else {}
    return (d / "program.pl").read_text(), d / "db", args
