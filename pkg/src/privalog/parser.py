"""Tokenizer, recursive-descent parser and pretty-printer for PrivaLog.

The concrete syntax follows SWI-Prolog conventions where the language is
silent: `%` starts a comment, `'...'` quotes a string, a bare lower-case
identifier in term position is a string constant, and operator precedence is
the usual one (`;` < `,` < `\\+` < comparisons < `+ -` < `* /` < `^`).
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass

from .ast import (
    AGG_KINDS,
    CMP_OPS,
    DTYPES,
    FALSE,
    HOLE,
    PTYPES,
    TRUE,
    Aggregation,
    And,
    Atom,
    BinOp,
    Clause,
    Cmp,
    Column,
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
)
from .errors import ParseError, ValidationError

INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+|%[^\n]*)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<str>'(?:[^'\\]|\\.)*'|"(?:[^"\\]|\\.)*")
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<param>@[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>:-|\?-|=:=|=/=|=<|>=|\\\+|[<>=(),;.+\-*/^\[\]:])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True, slots=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, pos - line_start + 1)
        kind = m.lastgroup
        text = m.group()
        if kind != "ws":
            tokens.append(Token(kind, text, line, pos - line_start + 1))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


def _unquote(text: str) -> str:
    body = text[1:-1]
    return re.sub(r"\\(.)", r"\1", body)


class _Parser:
    def __init__(self, source: str):
        self.toks = tokenize(source)
        self.i = 0

    # -- token helpers -----------------------------------------------------
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def at(self, text: str) -> bool:
        t = self.tok
        return t.kind in ("punct", "name") and t.text == text

    def error(self, msg: str, tok: Token | None = None) -> ParseError:
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        t = self.tok
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.at(text):
            self.i += 1
            return True
        return False

    # -- program -----------------------------------------------------------
    def program(self):
        schemas: list[SchemaDecl] = []
        pkeys: list[tuple[str, str | int, Token]] = []
        clauses: list[Clause] = []
        goals: list[tuple[Goal, Token]] = []
        while self.tok.kind != "eof":
            start = self.tok
            if self.accept(":-"):
                self.directive(schemas, pkeys)
            elif self.accept("?-"):
                goals.append((self.query_goal(), start))
                self.expect(".")
            elif self.tok.kind == "name" and self.tok.text == "goal" and self.peek().text == "(" \
                    and self.peek(2).text == "[":
                goals.append((self.fig3_goal(), start))
            else:
                clauses.append(self.clause())
        return schemas, pkeys, clauses, goals

    def directive(self, schemas, pkeys) -> None:
        tok = self.tok
        if self.accept("type"):
            self.expect("(")
            schemas.append(self.relation())
            self.expect(")")
        elif self.accept("primary_key"):
            self.expect("(")
            pred = self.name()
            self.expect(",")
            if self.tok.kind == "num":
                col: str | int = int(self.tok.text)
                self.i += 1
            else:
                col = self.name()
            self.expect(")")
            pkeys.append((pred, col, tok))
        else:
            raise self.error("unknown directive (expected type(...) or primary_key(...))")
        self.expect(".")

    def name(self) -> str:
        if self.tok.kind != "name":
            raise self.error(f"expected an identifier, found {self.tok.text!r}")
        t = self.tok.text
        self.i += 1
        return t

    def relation(self) -> SchemaDecl:
        pred = self.name()
        self.expect("(")
        cols: list[Column] = []
        while True:
            tok = self.tok
            if tok.kind not in ("name", "var"):
                raise self.error("expected attribute name")
            self.i += 1
            self.expect(":")
            ptype = self.name()
            if ptype not in PTYPES:
                raise self.error(f"unknown privacy type {ptype!r}", self.toks[self.i - 1])
            dtype = self.name()
            if dtype not in DTYPES:
                raise self.error(f"unknown data type {dtype!r}", self.toks[self.i - 1])
            cols.append(Column(tok.text, ptype, dtype))
            if not self.accept(","):
                break
        self.expect(")")
        return SchemaDecl(pred, tuple(cols))

    def clause(self) -> Clause:
        start = self.tok
        head = self.atom()
        body: Formula = TRUE
        if self.accept(":-"):
            body = self.formula()
        self.expect(".")
        return Clause(head, body, start.line)

    def atom(self) -> Atom:
        pred = self.name()
        args: list[Term] = []
        if self.accept("("):
            args.append(self.term())
            while self.accept(","):
                args.append(self.term())
            self.expect(")")
        return Atom(pred, tuple(args))

    # -- goals -------------------------------------------------------------
    def query_goal(self) -> Goal:
        name_tok = self.tok
        pred = self.name()
        if pred in AGG_KINDS and self.at("(") and self.peek().kind == "name" and self.peek(2).text == "(":
            self.expect("(")
            inner = self.goal_atom(self.name())
            self.expect(",")
            over = self.var_name()
            self.expect(",")
            result = self.var_name()
            self.expect(")")
            names = [a.name for a in inner.args if isinstance(a, Var)]
            if over not in names:
                raise ParseError(f"aggregated variable {over} does not occur in the goal",
                                 name_tok.line, name_tok.col)
            return Goal(inner.pred, inner.args, Aggregation(pred, over, result))
        return self.goal_atom(pred)

    def var_name(self) -> str:
        if self.tok.kind != "var" or self.tok.text == HOLE:
            raise self.error("expected a named variable")
        t = self.tok.text
        self.i += 1
        return t

    def goal_atom(self, pred: str) -> Goal:
        args: list[Term] = []
        self.expect("(")
        while True:
            args.append(self.goal_arg())
            if not self.accept(","):
                break
        self.expect(")")
        return Goal(pred, tuple(args))

    def goal_arg(self) -> Term:
        t = self.tok
        if t.kind == "var":
            self.i += 1
            return Var(t.text)
        if t.kind == "param":
            self.i += 1
            return Param(t.text[1:])
        term = self.term()
        if not isinstance(term, Const):
            raise self.error("goal arguments must be variables, constants or @parameters", t)
        return term

    def fig3_goal(self) -> Goal:
        start = self.tok
        self.expect("goal")
        self.expect("(")
        ins = self.var_list()
        self.expect(",")
        outs = self.var_list()
        self.expect(")")
        self.expect(":-")
        body = self.atom()
        self.expect(".")
        args: list[Term] = []
        for a in body.args:
            if not isinstance(a, Var):
                raise ParseError("goal(...) body arguments must be variables", start.line, start.col)
            if a.name in ins:
                args.append(Param(a.name))
            elif a.name in outs:
                args.append(a)
            else:
                args.append(Var(HOLE))
        return Goal(body.pred, tuple(args))

    def var_list(self) -> list[str]:
        self.expect("[")
        names: list[str] = []
        if not self.at("]"):
            names.append(self.var_name())
            while self.accept(","):
                names.append(self.var_name())
        self.expect("]")
        return names

    # -- formulas ----------------------------------------------------------
    def formula(self) -> Formula:
        items = [self.conjunction()]
        while self.accept(";"):
            items.append(self.conjunction())
        return items[0] if len(items) == 1 else Or(tuple(items))

    def conjunction(self) -> Formula:
        items = [self.unary_formula()]
        while self.accept(","):
            items.append(self.unary_formula())
        return items[0] if len(items) == 1 else And(tuple(items))

    def unary_formula(self) -> Formula:
        if self.accept("\\+"):
            return Not(self.unary_formula())
        if self.at("not") and self.peek().text == "(":
            self.i += 1
            self.expect("(")
            inner = self.formula()
            self.expect(")")
            return Not(inner)
        return self.literal()

    def literal(self) -> Formula:
        t = self.tok
        if t.kind == "punct" and t.text == "(":
            save = self.i
            try:
                self.i += 1
                inner = self.formula()
                self.expect(")")
                if self.tok.text in CMP_OPS or self.tok.text in ("+", "-", "*", "/", "^"):
                    raise self.error("parenthesised term")
                return inner
            except ParseError:
                self.i = save
            return self.comparison()
        if t.kind == "name" and t.text != "sqrt":
            nxt = self.peek()
            if nxt.text == "(":
                return self.atom()
            if t.text in ("true", "false", "fail") and nxt.text not in CMP_OPS:
                self.i += 1
                return TRUE if t.text == "true" else FALSE
        return self.comparison()

    def comparison(self) -> Formula:
        left = self.term()
        op = self.tok.text
        if op not in CMP_OPS or self.tok.kind not in ("punct", "name"):
            raise self.error(f"expected a comparison operator, found {op!r}")
        self.i += 1
        right = self.term()
        return Cmp(op, left, right)

    # -- terms -------------------------------------------------------------
    def term(self) -> Term:
        left = self.mul_term()
        while self.tok.kind == "punct" and self.tok.text in ("+", "-"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.mul_term())
        return left

    def mul_term(self) -> Term:
        left = self.neg_term()
        while self.tok.kind == "punct" and self.tok.text in ("*", "/"):
            op = self.tok.text
            self.i += 1
            left = BinOp(op, left, self.neg_term())
        return left

    def neg_term(self) -> Term:
        if self.tok.kind == "punct" and self.tok.text == "-":
            self.i += 1
            inner = self.neg_term()
            if isinstance(inner, Const) and not isinstance(inner.value, str):
                return Const(-inner.value)
            return BinOp("-", Const(0), inner)
        return self.pow_term()

    def pow_term(self) -> Term:
        base = self.primary()
        if self.tok.kind == "punct" and self.tok.text == "^":
            self.i += 1
            return BinOp("^", base, self.neg_term())
        return base

    def primary(self) -> Term:
        t = self.tok
        if t.kind == "num":
            self.i += 1
            if re.fullmatch(r"\d+", t.text):
                v = int(t.text)
                if v > INT64_MAX + 1:
                    raise self.error("integer literal out of 64-bit range", t)
                return Const(v)
            v = float(t.text)
            if not math.isfinite(v):
                raise self.error("float literal out of range", t)
            return Const(v)
        if t.kind == "str":
            self.i += 1
            return Const(_unquote(t.text))
        if t.kind == "var":
            self.i += 1
            return Var(t.text)
        if t.kind == "param":
            self.i += 1
            return Param(t.text[1:])
        if t.kind == "name":
            self.i += 1
            if t.text == "sqrt":
                self.expect("(")
                arg = self.term()
                self.expect(")")
                return Sqrt(arg)
            return Const(t.text)
        if self.accept("("):
            inner = self.term()
            self.expect(")")
            return inner
        raise self.error(f"expected a term, found {t.text or 'end of input'!r}")


# ---------------------------------------------------------------- validation


def _check_const_range(t: Term, where: str) -> None:
    if isinstance(t, Const) and isinstance(t.value, int) and not (INT64_MIN <= t.value <= INT64_MAX):
        raise ValidationError(f"{where}: integer constant {t.value} outside 64-bit range")
    if isinstance(t, BinOp):
        _check_const_range(t.left, where)
        _check_const_range(t.right, where)
    elif isinstance(t, Sqrt):
        _check_const_range(t.arg, where)


def _terms_in(f: Formula):
    if isinstance(f, Atom):
        yield from f.args
    elif isinstance(f, Cmp):
        yield f.left
        yield f.right
    elif isinstance(f, Not):
        yield from _terms_in(f.arg)
    elif isinstance(f, (And, Or)):
        for i in f.items:
            yield from _terms_in(i)


def _has_param(t: Term) -> bool:
    if isinstance(t, Param):
        return True
    if isinstance(t, BinOp):
        return _has_param(t.left) or _has_param(t.right)
    if isinstance(t, Sqrt):
        return _has_param(t.arg)
    return False


def validate(program: Program) -> Program:
    """Check static well-formedness; returns the program unchanged."""
    seen_schema: set[str] = set()
    for s in program.schemas:
        if s.pred in seen_schema:
            raise ValidationError(f"duplicate type declaration for {s.pred}")
        seen_schema.add(s.pred)
        names = [c.name for c in s.columns]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate column name in type declaration of {s.pred}")
        if s.primary_key is not None and not (0 <= s.primary_key < s.arity):
            raise ValidationError(f"primary key of {s.pred} does not index a column")

    arity: dict[str, int] = {s.pred: s.arity for s in program.schemas}
    edb = program.edb
    for c in program.clauses:
        where = f"clause at line {c.line}" if c.line else f"clause for {c.head.pred}"
        if c.head.pred in edb:
            raise ValidationError(f"{where}: {c.head.pred} is declared as a table and cannot have clauses")
        for a in c.head.args:
            _check_const_range(a, where)
            if _has_param(a):
                raise ValidationError(f"{where}: @parameters may only appear in the goal")
        for t in _terms_in(c.body):
            _check_const_range(t, where)
            if _has_param(t):
                raise ValidationError(f"{where}: @parameters may only appear in the goal")
        for atom in (c.head, *atoms_of(c.body)):
            known = arity.setdefault(atom.pred, atom.arity)
            if known != atom.arity:
                raise ValidationError(
                    f"{where}: {atom.pred} used with arity {atom.arity}, expected {known}"
                )
    idb = program.idb
    for c in program.clauses:
        for atom in atoms_of(c.body):
            if atom.pred not in edb and atom.pred not in idb:
                raise ValidationError(f"unknown predicate {atom.pred}/{atom.arity}")

    g = program.goal
    if g.pred not in edb and g.pred not in idb:
        raise ValidationError(f"goal refers to unknown predicate {g.pred}")
    if arity.get(g.pred, len(g.args)) != len(g.args):
        raise ValidationError(f"goal uses {g.pred} with arity {len(g.args)}, expected {arity[g.pred]}")
    named = [a.name for a in g.args if isinstance(a, Var) and not a.is_hole]
    if len(set(named)) != len(named):
        raise ValidationError("a goal variable may occur only once")
    params = list(g.params)
    if len(set(params)) != len(params):
        raise ValidationError("a goal @parameter may occur only once")
    for a in g.args:
        _check_const_range(a, "goal")
    if g.aggregation and g.aggregation.over not in named:
        raise ValidationError("aggregated variable must be a named goal variable")
    return program


def parse(source: str) -> Program:
    """Parse and validate PrivaLog source text."""
    p = _Parser(source)
    schemas, pkeys, clauses, goals = p.program()
    if not goals:
        raise ParseError("program has no goal")
    if len(goals) > 1:
        tok = goals[1][1]
        raise ParseError("program has more than one goal", tok.line, tok.col)
    by_name = {s.pred: s for s in schemas}
    for pred, col, tok in pkeys:
        s = by_name.get(pred)
        if s is None:
            raise ParseError(f"primary_key refers to undeclared table {pred}", tok.line, tok.col)
        if isinstance(col, int):
            idx = col
        else:
            names = [c.name for c in s.columns]
            if col not in names:
                raise ParseError(f"table {pred} has no column {col}", tok.line, tok.col)
            idx = names.index(col)
        by_name[pred] = SchemaDecl(s.pred, s.columns, idx)
    program = Program(tuple(by_name[s.pred] for s in schemas), tuple(clauses), goals[0][0])
    return validate(program)


def parse_formula(source: str) -> Formula:
    p = _Parser(source)
    f = p.formula()
    if p.tok.kind != "eof":
        raise p.error("trailing input after formula")
    return f


def parse_term(source: str) -> Term:
    p = _Parser(source)
    t = p.term()
    if p.tok.kind != "eof":
        raise p.error("trailing input after term")
    return t


def parse_clause(source: str) -> Clause:
    p = _Parser(source)
    c = p.clause()
    if p.tok.kind != "eof":
        raise p.error("trailing input after clause")
    return c


# ------------------------------------------------------------ pretty-printer

_PREC = {"+": 500, "-": 500, "*": 400, "/": 400, "^": 200}


def _fmt_const(v: int | float | str) -> str:
    if isinstance(v, str):
        return "'" + v.replace("\\", "\\\\").replace("'", "\\'") + "'"
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError(f"cannot print non-finite constant {v}")
        text = repr(v)
        if "e" in text and "." not in text.split("e")[0]:
            mant, exp = text.split("e")
            text = f"{mant}.0e{exp}"
        return text
    return str(v)


def format_term(t: Term, ctx: int = 1200) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, Param):
        return "@" + t.name
    if isinstance(t, Const):
        s = _fmt_const(t.value)
        if s.startswith("-") and ctx <= 500:
            return f"({s})"
        return s
    if isinstance(t, Sqrt):
        return f"sqrt({format_term(t.arg)})"
    prec = _PREC[t.op]
    if t.op == "^":  # xfy
        left = format_term(t.left, prec - 1)
        right = format_term(t.right, prec)
    else:  # yfx
        left = format_term(t.left, prec)
        right = format_term(t.right, prec - 1)
    s = f"{left} {t.op} {right}"
    return f"({s})" if prec > ctx else s


def format_formula(f: Formula, ctx: int = 1200) -> str:
    if isinstance(f, Truth):
        return "true" if f.value else "false"
    if isinstance(f, Atom):
        if not f.args:
            return f.pred
        return f"{f.pred}({', '.join(format_term(a) for a in f.args)})"
    if isinstance(f, Cmp):
        return f"{format_term(f.left, 699)} {f.op} {format_term(f.right, 699)}"
    if isinstance(f, Not):
        inner = format_formula(f.arg, 900)
        return f"\\+ {inner}"
    if isinstance(f, And):
        s = ", ".join(format_formula(i, 999) for i in f.items)
        return f"({s})" if ctx < 1000 else s
    if isinstance(f, Or):
        s = " ; ".join(format_formula(i, 1099) for i in f.items)
        return f"({s})" if ctx < 1100 else s
    raise TypeError(f"not a formula: {f!r}")


def format_clause(c: Clause) -> str:
    head = format_formula(c.head)
    if c.body == TRUE:
        return head + "."
    if isinstance(c.body, And):
        inner = ",\n    ".join(format_formula(i, 999) for i in c.body.items)
        return f"{head} :-\n    {inner}."
    return f"{head} :- {format_formula(c.body)}."


def format_schema(s: SchemaDecl) -> str:
    cols = ", ".join(f"{c.name}:{c.ptype} {c.dtype}" for c in s.columns)
    text = f":-type({s.pred}({cols}))."
    if s.primary_key is not None:
        text += f"\n:-primary_key({s.pred}, {s.columns[s.primary_key].name})."
    return text


def format_goal(g: Goal) -> str:
    inner = f"{g.pred}({', '.join(format_term(a) for a in g.args)})"
    if g.aggregation:
        a = g.aggregation
        inner = f"{a.kind}({inner}, {a.over}, {a.result})"
    return f"?-{inner}."


def format_program(p: Program) -> str:
    parts = [format_schema(s) for s in p.schemas]
    if parts:
        parts.append("")
    parts.extend(format_clause(c) for c in p.clauses)
    parts.append("")
    parts.append(format_goal(p.goal))
    return "\n".join(parts) + "\n"
