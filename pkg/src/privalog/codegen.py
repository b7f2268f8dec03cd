"""Code generation: inlined rules plus goal to a core IR program.

Each rule for the goal predicate becomes one function.  The function
fetches every EDB table its body mentions, forms their cross product with
`join`, and computes one satisfiability bit per row of the product:

* an atom argument that is the first occurrence of a variable simply names
  the joined column; any other argument becomes an `==` test;
* a ground comparison becomes the corresponding vector comparison;
* an assignment `X = e` declares and computes X (its bit is `true`);
* a negated atom becomes `!member(...)` against the whole table.

The function returns the conjunction of all bits together with the goal's
free argument columns.  `main` calls every function, concatenates the
results, shuffles them, zeroes the bits of duplicate answers, declassifies
the bit vector and publishes the filtered columns.  With a terminal
aggregation the masked aggregate is declassified and published instead.

The whole pipeline (parse result to IR) is wrapped by `compile_program`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

from . import ir
from .adorn import AdornedProgram, adorn
from .ast import (
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
    SchemaDecl,
    Sqrt,
    Term,
    Truth,
    Var,
    atoms_of,
    conjuncts,
    formula_vars,
    term_vars,
)
from .errors import CompileError
from .normalize import split_program
from .parser import format_program, parse
from .prune import ExternalSolver
from .refeval import answer_columns
from .unfold import DEFAULT_MAX_UNFOLD, RuleBase, unfold_program

_IR_CMP = {"<": "<", "=<": "<=", ">": ">", ">=": ">=", "=:=": "==", "=/=": "!=",
           "=": "==", "is": "=="}


def _join_dom(*doms: str) -> str:
    return "private" if "private" in doms else "public"


def _const_type(v: object) -> str:
    if isinstance(v, bool):
        raise CompileError("boolean constants are not PrivaLog values")
    if isinstance(v, int):
        return "int"
    if isinstance(v, float):
        return "float"
    return "string"


def _num_join(op: str, a: str, b: str) -> str:
    if "string" in (a, b):
        raise CompileError(f"arithmetic operator {op} applied to a string")
    if op in ("/", "^"):
        return "float"
    return "int" if a == b == "int" else "float"


def _unify(types: Iterable[str], what: str) -> str:
    ts = set(types)
    if "string" in ts and len(ts) > 1:
        raise CompileError(f"{what} is used both as a string and as a number")
    if "string" in ts:
        return "string"
    return "float" if "float" in ts else "int"


@dataclass
class _Val:
    name: str
    type: str
    domain: str
    scalar: bool  # a single value, broadcast against the row vectors


@dataclass
class _Expr:
    expr: ir.Expr
    type: str
    domain: str
    scalar: bool


def _lits(body: Formula) -> list[Formula]:
    return [x for x in conjuncts(body) if x != Truth(True)]


class _RuleGen:
    """Generates one function for one inlined rule."""

    def __init__(self, fname: str, rule: Clause, schemas: dict[str, SchemaDecl],
                 inputs: list[tuple[int, str, str, str]], outputs: list[tuple[int, str]]):
        self.fname = fname
        self.rule = rule
        self.schemas = schemas
        self.inputs = inputs  # (position, parameter name, domain, type)
        self.outputs = outputs  # (position, unified type)
        self.body: list[ir.Stmt] = []
        self.env: dict[str, _Val] = {}
        self.bits: list[_Val] = []
        self.names: set[str] = set()
        self.counter = 0
        self.head_tests: list[tuple[Term, _Val]] = []

    # helpers ----------------------------------------------------------
    def fresh(self, prefix: str) -> str:
        while True:
            self.counter += 1
            n = f"{prefix}{self.counter}"
            if n not in self.names:
                self.names.add(n)
                return n

    def declare(self, name: str, domain: str, typ: str) -> None:
        self.names.add(name)
        self.body.append(ir.Decl(name, domain, typ))

    def assign(self, targets: list[str], e: ir.Expr) -> None:
        self.body.append(ir.Assign(tuple(targets), e))

    def schema(self, pred: str) -> SchemaDecl:
        s = self.schemas.get(pred)
        if s is None:
            raise CompileError(f"{self.fname}: atom on {pred}, which is neither declared nor inlined")
        return s

    def term(self, t: Term) -> _Expr:
        if isinstance(t, Var):
            v = self.env.get(t.name)
            if v is None:
                raise CompileError(f"{self.fname}: variable {t.name} is used before it is bound")
            return _Expr(ir.EVar(v.name), v.type, v.domain, v.scalar)
        if isinstance(t, Const):
            typ = _const_type(t.value)
            return _Expr(ir.EConst(typ, t.value), typ, "public", True)
        if isinstance(t, BinOp):
            l, r = self.term(t.left), self.term(t.right)
            typ = _num_join(t.op, l.type, r.type)
            if t.op == "^":
                e: ir.Expr = ir.ECall("pow", (l.expr, r.expr))
            else:
                e = ir.EBin(t.op, l.expr, r.expr)
            return _Expr(e, typ, _join_dom(l.domain, r.domain), l.scalar and r.scalar)
        if isinstance(t, Sqrt):
            a = self.term(t.arg)
            _num_join("sqrt", a.type, "float")
            return _Expr(ir.ECall("sqrt", (a.expr,)), "float", a.domain, a.scalar)
        if isinstance(t, Param):
            raise CompileError(f"{self.fname}: client argument @{t.name} inside a rule body")
        raise CompileError(f"{self.fname}: unsupported term {t!r}")

    def compare(self, op: str, l: _Expr, r: _Expr) -> _Expr:
        irop = _IR_CMP[op]
        strs = (l.type == "string", r.type == "string")
        if any(strs) and not all(strs):
            raise CompileError(f"{self.fname}: comparison {op} between a string and a number")
        if all(strs) and irop not in ("==", "!="):
            raise CompileError(f"{self.fname}: ordering comparison {op} on strings")
        return _Expr(ir.EBin(irop, l.expr, r.expr), "bool", _join_dom(l.domain, r.domain),
                     l.scalar and r.scalar)

    def test(self, f: Formula) -> _Expr:
        """A ground, predicate-free formula as a boolean vector expression."""
        if isinstance(f, Truth):
            return _Expr(ir.EConst("bool", f.value), "bool", "public", True)
        if isinstance(f, Cmp):
            return self.compare(f.op, self.term(f.left), self.term(f.right))
        if isinstance(f, Not):
            a = self.test(f.arg)
            return _Expr(ir.ENot(a.expr), "bool", a.domain, a.scalar)
        if isinstance(f, (And, Or)):
            if not f.items:
                return self.test(Truth(isinstance(f, And)))
            parts = [self.test(i) for i in f.items]
            op = "&" if isinstance(f, And) else "|"
            e = parts[0].expr
            for p in parts[1:]:
                e = ir.EBin(op, e, p.expr)
            return _Expr(e, "bool", _join_dom(*(p.domain for p in parts)),
                         all(p.scalar for p in parts))
        raise CompileError(f"{self.fname}: literal {f!r} is not a ground test")

    def add_bit(self, e: _Expr) -> None:
        name = self.fresh("b_")
        self.declare(name, e.domain, "bool")
        self.assign([name], e.expr)
        self.bits.append(_Val(name, "bool", e.domain, e.scalar))

    def ground(self, t: Term) -> bool:
        return all(v in self.env for v in term_vars(t))

    # generation ------------------------------------------------------
    def generate(self) -> ir.Func:
        head = self.rule.head
        params = []
        for pos, pname, dom, typ in self.inputs:
            a = head.args[pos]
            params.append(ir.Param(pname, dom, typ))
            self.names.add(pname)
            if isinstance(a, Var) and a.name not in self.env:
                self.env[a.name] = _Val(pname, typ, dom, True)
            else:
                # a repeated or constant head argument is a test against the input
                self.head_tests.append((a, _Val(pname, typ, dom, True)))

        lits = _lits(self.rule.body)
        atoms = [x for x in lits if isinstance(x, Atom)]
        rest = [x for x in lits if not isinstance(x, Atom)]

        # fetch and join every positive EDB atom
        groups: list[list[str]] = []
        joined: list[list[str]] = []
        for k, a in enumerate(atoms):
            s = self.schema(a.pred)
            if len(a.args) != s.arity:
                raise CompileError(f"{self.fname}: {a.pred} used with {len(a.args)} arguments, "
                                   f"declared with {s.arity}")
            cols = [f"t{k}_{c}" for c in range(s.arity)]
            for name, col in zip(cols, s.columns):
                self.declare(name, col.ptype, col.dtype)
            self.assign(cols, ir.ECall("getTable", (ir.EConst("name", a.pred),)))
            groups.append(cols)
            joined.append([f"r{k}_{c}" for c in range(s.arity)])
        if atoms:
            for k, a in enumerate(atoms):
                for name, col in zip(joined[k], self.schema(a.pred).columns):
                    self.declare(name, col.ptype, col.dtype)
            self.assign([n for g in joined for n in g],
                        ir.ECall("join", tuple(ir.EGroup(tuple(ir.EVar(n) for n in g))
                                               for g in groups)))
        # bind first occurrences, collect tests for the rest
        arg_tests: list[tuple[_Val, Term]] = []
        for k, a in enumerate(atoms):
            cols = self.schema(a.pred).columns
            for c, (arg, col) in enumerate(zip(a.args, cols)):
                v = _Val(joined[k][c], col.dtype, col.ptype, False)
                if isinstance(arg, Var) and arg.name not in self.env:
                    self.env[arg.name] = v
                else:
                    arg_tests.append((v, arg))
        for a, v in self.head_tests:
            arg_tests.append((v, a))
        for v, arg in arg_tests:
            if not self.ground(arg):
                # bound later by an assignment; test once everything is known
                rest.append(Cmp("=:=", Var("\0col:" + v.name), arg))
                self.env["\0col:" + v.name] = v
                continue
            self.add_bit(self.compare("=:=", _Expr(ir.EVar(v.name), v.type, v.domain, v.scalar),
                                      self.term(arg)))

        # remaining literals in dependency order
        pending = list(rest)
        while pending:
            for i, lit in enumerate(pending):
                if self.ready(lit):
                    del pending[i]
                    self.literal(lit)
                    break
            else:
                raise CompileError(
                    f"{self.fname}: cannot order literals {pending!r}; is the rule range-restricted?")

        # b = ones & b_1 & ... & b_m
        if atoms:
            base = ir.ECall("ones", (ir.EVar(joined[0][0]),))
            scalar = False
        else:
            base = ir.EConst("bool", True)
            scalar = True
        e: ir.Expr = base
        for bit in self.bits:
            e = ir.EBin("&", e, ir.EVar(bit.name))
        bdom = _join_dom("public", *(b.domain for b in self.bits))
        self.declare("b", bdom, "bool")
        self.assign(["b"], e)
        self.names.add("b")

        results = [ir.Param("b", bdom, "bool")]
        ret = ["b"]
        for n, (pos, typ) in enumerate(self.outputs):
            arg = head.args[pos]
            if not self.ground(arg):
                raise CompileError(f"{self.fname}: head argument {pos} is never bound")
            x = self.term(arg)
            if x.type == "string" and typ != "string" or typ == "string" and x.type != "string":
                raise CompileError(f"{self.fname}: output {n} mixes strings and numbers across rules")
            if x.type == "int" and typ == "float":
                x = _Expr(ir.ECall("cast_float", (x.expr,)), "float", x.domain, x.scalar)
            if x.scalar and not scalar:
                x = _Expr(ir.ECall("broadcast", (x.expr, ir.EVar("b"))), x.type, x.domain, False)
            name = f"y_{n}"
            self.declare(name, x.domain, typ)
            self.assign([name], x.expr)
            results.append(ir.Param(name, x.domain, typ))
            ret.append(name)
        self.body.append(ir.Return(tuple(ret)))
        return ir.Func(self.fname, tuple(params), tuple(results), tuple(self.body))

    def ready(self, lit: Formula) -> bool:
        if isinstance(lit, Cmp) and lit.op in ("=", "is"):
            lg, rg = self.ground(lit.left), self.ground(lit.right)
            return (lg and rg) or (rg and isinstance(lit.left, Var)) or \
                (lg and isinstance(lit.right, Var))
        if isinstance(lit, Not) and isinstance(lit.arg, Atom):
            return all(self.ground(a) or self._local(a, lit.arg) for a in lit.arg.args)
        return all(v in self.env for v in formula_vars(lit))

    def _local(self, a: Term, atom: Atom) -> bool:
        if not isinstance(a, Var):
            return False
        others = [x for x in _lits(self.rule.body) if x != Not(atom)]
        return all(a.name not in formula_vars(x) for x in others) and \
            a.name not in formula_vars(self.rule.head)

    def literal(self, lit: Formula) -> None:
        if isinstance(lit, Cmp) and lit.op in ("=", "is"):
            lg, rg = self.ground(lit.left), self.ground(lit.right)
            if not (lg and rg):
                var, rhs = (lit.left, lit.right) if rg else (lit.right, lit.left)
                assert isinstance(var, Var)
                x = self.term(rhs)
                self.declare(var.name, x.domain, x.type)
                self.assign([var.name], x.expr)
                self.env[var.name] = _Val(var.name, x.type, x.domain, x.scalar)
                return
        if isinstance(lit, Not) and isinstance(lit.arg, Atom):
            self.negated(lit.arg)
            return
        if isinstance(lit, Atom):
            raise CompileError(f"{self.fname}: IDB atom {lit.pred} was not inlined")
        if any(isinstance(x, Atom) for x in atoms_of(lit)):
            raise CompileError(f"{self.fname}: atom nested inside {lit!r}")
        self.add_bit(self.test(lit))

    def negated(self, a: Atom) -> None:
        s = self.schema(a.pred)
        if len(a.args) != s.arity:
            raise CompileError(f"{self.fname}: {a.pred} used with {len(a.args)} arguments")
        cols = [self.fresh(f"n_{a.pred}_") for _ in s.columns]
        for name, col in zip(cols, s.columns):
            self.declare(name, col.ptype, col.dtype)
        self.assign(cols, ir.ECall("getTable", (ir.EConst("name", a.pred),)))
        table_dom = _join_dom(*(c.ptype for c in s.columns))
        # repeated local variables constrain the table rows themselves
        first: dict[str, int] = {}
        mask: ir.Expr = ir.ECall("ones", (ir.EVar(cols[0]),))
        key_cols: list[ir.Expr] = []
        keys: list[ir.Expr] = []
        dom = table_dom
        scalar = True
        for c, (arg, col) in enumerate(zip(a.args, s.columns)):
            if isinstance(arg, Var) and arg.name not in self.env:
                if arg.name in first:
                    other = first[arg.name]
                    if (col.dtype == "string") != (s.columns[other].dtype == "string"):
                        raise CompileError(f"{self.fname}: {arg.name} joins a string and a number column")
                    mask = ir.EBin("&", mask, ir.EBin("==", ir.EVar(cols[other]), ir.EVar(cols[c])))
                else:
                    first[arg.name] = c
                continue
            x = self.term(arg)
            self.compare("=:=", _Expr(ir.EVar(cols[c]), col.dtype, col.ptype, False), x)
            key_cols.append(ir.EVar(cols[c]))
            keys.append(x.expr)
            dom = _join_dom(dom, x.domain)
            scalar = scalar and x.scalar
        call = ir.ECall("member", (ir.EGroup(tuple(key_cols)), mask, ir.EGroup(tuple(keys))))
        self.add_bit(_Expr(ir.ENot(call), "bool", dom, scalar))


# ------------------------------------------------------------ type inference


def _atom_types(rule: Clause, schemas: dict[str, SchemaDecl]) -> dict[str, str]:
    types: dict[str, str] = {}
    for lit in _lits(rule.body):
        if isinstance(lit, Atom) and lit.pred in schemas:
            for arg, col in zip(lit.args, schemas[lit.pred].columns):
                if isinstance(arg, Var):
                    types.setdefault(arg.name, col.dtype)
    return types


def _static_type(t: Term, types: dict[str, str]) -> str | None:
    if isinstance(t, Const):
        return _const_type(t.value)
    if isinstance(t, Var):
        return types.get(t.name)
    if isinstance(t, Sqrt):
        return "float"
    if isinstance(t, BinOp):
        l, r = _static_type(t.left, types), _static_type(t.right, types)
        if t.op in ("/", "^"):
            return "float"
        if l is None or r is None:
            return None
        return _num_join(t.op, l, r)
    return None


def _input_evidence(rule: Clause, pos: int, schemas: dict[str, SchemaDecl]) -> list[str]:
    """Types the rule forces on the head variable at input position `pos`."""
    a = rule.head.args[pos]
    if not isinstance(a, Var):
        t = _static_type(a, {})
        return [t] if t else []
    types = _atom_types(rule, schemas)
    out = []
    if a.name in types:
        out.append(types[a.name])
    for lit in _lits(rule.body):
        cmps = [lit] if isinstance(lit, Cmp) else []
        if isinstance(lit, Not) and isinstance(lit.arg, Cmp):
            cmps = [lit.arg]
        for c in cmps:
            for mine, other in ((c.left, c.right), (c.right, c.left)):
                if mine == a:
                    t = _static_type(other, types)
                    if t:
                        out.append(t)
    return out


def _output_type(rule: Clause, pos: int, schemas: dict[str, SchemaDecl],
                 input_types: dict[int, str]) -> str:
    """Static type of head argument `pos` of an inlined rule."""
    types = _atom_types(rule, schemas)
    for i, t in input_types.items():
        a = rule.head.args[i]
        if isinstance(a, Var):
            types.setdefault(a.name, t)
    lits = _lits(rule.body)
    changed = True
    while changed:
        changed = False
        for lit in lits:
            if isinstance(lit, Cmp) and lit.op in ("=", "is"):
                for var, rhs in ((lit.left, lit.right), (lit.right, lit.left)):
                    if isinstance(var, Var) and var.name not in types:
                        t = _static_type(rhs, types)
                        if t is not None:
                            types[var.name] = t
                            changed = True
    t = _static_type(rule.head.args[pos], types)
    if t is None:
        raise CompileError(f"cannot infer the type of argument {pos} of {rule.head.pred}")
    return t


# ---------------------------------------------------------------- program


def _program_strings(p: Program) -> list[str]:
    out: set[str] = set()

    def walk_t(t: Term) -> None:
        if isinstance(t, Const) and isinstance(t.value, str):
            out.add(t.value)
        elif isinstance(t, BinOp):
            walk_t(t.left)
            walk_t(t.right)
        elif isinstance(t, Sqrt):
            walk_t(t.arg)

    def walk(f: Formula) -> None:
        if isinstance(f, Atom):
            for a in f.args:
                walk_t(a)
        elif isinstance(f, Cmp):
            walk_t(f.left)
            walk_t(f.right)
        elif isinstance(f, Not):
            walk(f.arg)
        elif isinstance(f, (And, Or)):
            for i in f.items:
                walk(i)

    for c in p.clauses:
        walk(c.head)
        walk(c.body)
    for a in p.goal.args:
        walk_t(a)
    return sorted(out)


def generate(schemas: Iterable[SchemaDecl], goal: Goal, rules: Iterable[Clause],
             strings: Iterable[str] = ()) -> ir.CoreProgram:
    """Core IR for `goal` over inlined `rules` (only rules for goal.pred are used)."""
    sch = {s.pred: s for s in schemas}
    goal_rules = [r for r in rules if r.head.pred == goal.pred]
    arity = len(goal.args)
    for r in goal_rules:
        if len(r.head.args) != arity:
            raise CompileError(f"rule for {goal.pred} has arity {len(r.head.args)}, goal has {arity}")

    # inputs: one function parameter per bound goal position
    inputs: list[ir.GoalInput] = []
    for pos, a in goal.inputs:
        if isinstance(a, Const):
            inputs.append(ir.GoalInput(pos, "const", a.value, "public", _const_type(a.value)))
        else:
            ev = [t for r in goal_rules for t in _input_evidence(r, pos, sch)]
            typ = _unify(ev, f"argument @{a.name}")
            inputs.append(ir.GoalInput(pos, "param", a.name, "private", typ))
    in_types = {i.position: i.type for i in inputs}

    positions = goal.answer_positions
    cols = answer_columns(goal)
    out_types = []
    for pos, name in zip(positions, cols):
        ts = [_output_type(r, pos, sch, in_types) for r in goal_rules]
        out_types.append(_unify(ts, f"output {name}") if ts else "int")

    pnames = [(i.position, f"in_p{i.position}" if i.kind == "param" else f"in_c{i.position}",
               i.domain, i.type) for i in inputs]
    functions = []
    for j, r in enumerate(goal_rules):
        gen = _RuleGen(f"{goal.pred}_{j + 1}", r, sch, pnames, list(zip(positions, out_types)))
        functions.append(gen.generate())

    main: list[ir.Stmt] = []
    for (pos, pname, _, typ), gi in zip(pnames, inputs):
        main.append(ir.Decl(pname, gi.domain, typ))
        if gi.kind == "param":
            main.append(ir.Assign((pname,), ir.ECall("argument", (ir.EConst("name", gi.value),))))
        else:
            main.append(ir.Assign((pname,), ir.EConst(typ, gi.value)))

    n_out = len(positions)
    if functions:
        for j, f in enumerate(functions):
            names = [f"b_{j + 1}"] + [f"y_{j + 1}_{i}" for i in range(n_out)]
            for n, res in zip(names, f.results):
                main.append(ir.Decl(n, res.domain, res.type))
            main.append(ir.Assign(tuple(names),
                                  ir.ECall(f.name, tuple(ir.EVar(p[1]) for p in pnames))))
        doms = [_join_dom(*(f.results[i].domain for f in functions)) for i in range(n_out + 1)]
        all_names = ["b_all"] + [f"y_all_{i}" for i in range(n_out)]
        main += [ir.Decl(n, d, t) for n, d, t in zip(all_names, doms, ["bool"] + out_types)]
        groups = [ir.EGroup(tuple(ir.EVar(f"b_{j + 1}") for j in range(len(functions))))]
        groups += [ir.EGroup(tuple(ir.EVar(f"y_{j + 1}_{i}") for j in range(len(functions))))
                   for i in range(n_out)]
        main.append(ir.Assign(tuple(all_names), ir.ECall("concat", tuple(groups))))
    else:
        # no rule survived: the answer is empty, but the shape stays the same
        doms = ["public"] * (n_out + 1)
        all_names = ["b_all"] + [f"y_all_{i}" for i in range(n_out)]
        for n, t in zip(all_names, ["bool"] + out_types):
            main.append(ir.Decl(n, "public", t))
            main.append(ir.Assign((n,), ir.ECall("empty", (ir.EConst("name", t),))))
    sh_names = ["b_sh"] + [f"y_sh_{i}" for i in range(n_out)]
    main += [ir.Decl(n, d, t) for n, d, t in zip(sh_names, doms, ["bool"] + out_types)]
    main.append(ir.Assign(tuple(sh_names),
                          ir.ECall("shuffle", (ir.EGroup(tuple(ir.EVar(n) for n in all_names)),))))
    udom = _join_dom(*doms)
    main.append(ir.Decl("b_u", udom, "bool"))
    main.append(ir.Assign(("b_u",), ir.ECall(
        "unique", (ir.EVar("b_sh"), ir.EGroup(tuple(ir.EVar(n) for n in sh_names[1:]))))))

    outputs = tuple(ir.Param(c, d, t) for c, d, t in zip(cols, doms[1:], out_types))
    agg = goal.aggregation
    if agg is None:
        main.append(ir.Decl("pb", "public", "bool"))
        main.append(ir.Assign(("pb",), ir.ECall("declassify", (ir.EVar("b_u"),))))
        for c, n in zip(cols, sh_names[1:]):
            main.append(ir.Do(ir.ECall("publish", (
                ir.EConst("name", c), ir.ECall("filter", (ir.EVar(n), ir.EVar("pb")))))))
        meta_agg = None
    else:
        idx = cols.index(agg.over)
        ytype = out_types[idx]
        if agg.kind in ("min", "max", "sum") and ytype == "string":
            raise CompileError(f"{agg.kind} aggregation over the string column {agg.over}")
        rtype = "int" if agg.kind == "count" else ytype
        adom = _join_dom(udom, doms[idx + 1]) if agg.kind != "count" else udom
        main.append(ir.Decl("agg_v", adom, rtype))
        main.append(ir.Decl("agg_ok", adom, "bool"))
        main.append(ir.Assign(("agg_v", "agg_ok"), ir.ECall(
            f"{agg.kind}_masked", (ir.EVar(sh_names[idx + 1]), ir.EVar("b_u")))))
        main.append(ir.Decl("pub_v", "public", rtype))
        main.append(ir.Decl("pub_ok", "public", "bool"))
        main.append(ir.Assign(("pub_v", "pub_ok"), ir.ECall(
            "declassify", (ir.EGroup((ir.EVar("agg_v"), ir.EVar("agg_ok"))),))))
        main.append(ir.Do(ir.ECall("publish", (
            ir.EConst("name", agg.result), ir.EVar("pub_v"), ir.EVar("pub_ok")))))
        meta_agg = (agg.kind, agg.over, agg.result)

    tables = tuple(ir.TableDecl(s.pred, tuple(ir.Param(c.name, c.ptype, c.dtype) for c in s.columns))
                   for s in sch.values())
    meta = ir.GoalMeta(goal.pred, tuple(inputs), outputs, meta_agg)
    return ir.CoreProgram(tables, meta, tuple(functions), tuple(main), tuple(sorted(set(strings))))


# --------------------------------------------------------------- pipeline


@dataclass(frozen=True)
class CompileOptions:
    max_unfold: int = DEFAULT_MAX_UNFOLD
    strategy: str = "full"
    prune: bool = True
    merge_keys: bool = True
    solver: ExternalSolver | None = None


@dataclass
class Compilation:
    """Every intermediate product of one compiler run."""

    source: Program
    adorned: AdornedProgram
    rulebase: RuleBase
    core: ir.CoreProgram
    options: CompileOptions = field(default_factory=CompileOptions)

    @property
    def goal(self) -> Goal:
        return self.adorned.goal

    def dump_dnf(self) -> str:
        return format_program(split_program(self.source))

    def dump_adorned(self) -> str:
        return format_program(self.adorned.program)

    def dump_rulebase(self) -> str:
        text = format_program(self.rulebase.to_program(self.source.schemas, self.adorned.goal))
        rb = self.rulebase
        note = (f"% unfolding: strategy {rb.strategy}, {rb.iterations} iterations, "
                f"{'fixpoint' if rb.fixpoint else 'bound reached'}, {rb.pruned} pruned, "
                f"{rb.dropped} dropped\n")
        return note + text


def compile_program(program: Program, options: CompileOptions | None = None) -> Compilation:
    """Adorn, unfold, prune and generate IR for a parsed program."""
    opts = options or CompileOptions()
    ap = adorn(program)
    rb = unfold_program(ap, opts.max_unfold, opts.strategy, opts.prune, opts.solver,
                        opts.merge_keys)
    core = generate(program.schemas, ap.goal, rb.rules, _program_strings(program))
    ir.check_program(core)
    return Compilation(program, ap, rb, core, opts)


def compile_source(text: str, options: CompileOptions | None = None) -> Compilation:
    return compile_program(parse(text), options)


# ------------------------------------------------------- SecreC-flavoured text

_SC_TYPE = {"int": "int64", "float": "float64", "bool": "bool", "string": "uint32"}


def _sc_expr(e: ir.Expr | ir.EGroup) -> str:
    if isinstance(e, ir.EVar):
        return e.name
    if isinstance(e, ir.EConst):
        if e.type == "string":
            return f'CRC32("{e.value}")'
        if e.type == "name":
            return f'"{e.value}"'
        if e.type == "bool":
            return "true" if e.value else "false"
        return repr(e.value)
    if isinstance(e, ir.ENot):
        return f"!{_sc_expr(e.arg)}"
    if isinstance(e, ir.EBin):
        return f"({_sc_expr(e.left)} {e.op} {_sc_expr(e.right)})"
    if isinstance(e, ir.EGroup):
        return "{" + ", ".join(_sc_expr(i) for i in e.items) + "}"
    if isinstance(e, ir.ECall):
        return f"{e.func}({', '.join(_sc_expr(a) for a in e.args)})"
    raise TypeError(e)


def _sc_decl(name: str, dom: str, typ: str) -> str:
    d = "pd_shared3p " if dom == "private" else ""
    return f"{d}{_SC_TYPE[typ]}[[1]] {name}"


def _sc_stmts(stmts: Iterable[ir.Stmt], indent: str) -> list[str]:
    out = []
    for s in stmts:
        if isinstance(s, ir.Decl):
            out.append(f"{indent}{_sc_decl(s.name, s.domain, s.type)};")
        elif isinstance(s, ir.Assign):
            lhs = s.targets[0] if len(s.targets) == 1 else "{" + ", ".join(s.targets) + "}"
            out.append(f"{indent}{lhs} = {_sc_expr(s.expr)};")
        elif isinstance(s, ir.Do):
            out.append(f"{indent}{_sc_expr(s.expr)};")
        elif isinstance(s, ir.Return):
            out.append(f"{indent}return {{{', '.join(s.names)}}};")
    return out


def to_secrec(core: ir.CoreProgram) -> str:
    """Documentation-only rendering in SecreC-like surface syntax."""
    lines = ["// generated from PrivaLog; for reading only, not for compilation",
             "import stdlib;", "import shared3p;", "domain pd_shared3p shared3p;", ""]
    for f in core.functions:
        res = ", ".join(_sc_decl("", r.domain, r.type).strip() for r in f.results)
        params = ", ".join(_sc_decl(p.name, p.domain, p.type) for p in f.params)
        lines.append(f"{{{res}}} {f.name}({params}) {{")
        lines += _sc_stmts(f.body, "    ")
        lines += ["}", ""]
    lines.append("void main() {")
    lines += _sc_stmts(core.main, "    ")
    lines.append("}")
    return "\n".join(lines) + "\n"
